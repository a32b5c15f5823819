"""Seeded replicate execution.

Every replicate draws from its own generator, derived from
``(seed, stream, replicate index)`` alone, so results do not depend on the
number of workers or the order in which replicates finish.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


def replicate_rng(seed: int, rep: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream, rep)))


def run_replicates(fn, reps: int, seed: int, stream: int = 0, workers: int = 1) -> list:
    """Evaluate ``fn(rng, rep)`` for rep = 0..reps-1, returning results in rep order."""
    if workers <= 1:
        return [fn(replicate_rng(seed, r, stream), r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(replicate_rng(seed, r, stream), r), range(reps)))


@dataclass(frozen=True)
class MCEstimate:
    """A Monte Carlo proportion with its binomial standard error.

    The reported interval is estimate +/- 3 SE.
    """

    estimate: float
    se: float
    reps: int

    @classmethod
    def from_indicators(cls, hits) -> "MCEstimate":
        hits = np.asarray(hits, dtype=float)
        n = hits.size
        p = float(hits.mean())
        return cls(p, math.sqrt(max(p * (1 - p), 0.0) / n), n)

    @property
    def half_width(self) -> float:
        return 3.0 * self.se

    @property
    def ci(self) -> tuple:
        return (self.estimate - self.half_width, self.estimate + self.half_width)

    def nominal_bound(self, level: float) -> float:
        """level + 3 SE computed at the nominal level, the acceptance bound for FWER."""
        return level + 3.0 * math.sqrt(level * (1 - level) / self.reps)
