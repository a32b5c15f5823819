"""Synthetic linkage-weighted association studies and Monte Carlo harnesses.

A study has a linkage trace over a genome of chromosomes, each an AR(1)
Gaussian process with unit marginal variance plus triangular mean bumps at
planted variants, and independent association statistics at random
positions. Signals sit at the planted variants. The trace sets binary
weights for the association tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from . import distfn
from .designer import BinaryWeightScheme
from .errors import DomainError
from .hypotheses import MCOutcome, WeightVector, check_probability
from .montecarlo import MCEstimate, replicate_rng, run_replicates
from .procedures import PROCEDURES


@dataclass(frozen=True)
class GenomeConfig:
    """Study layout.

    Attributes:
        n_chrom: number of chromosomes.
        positions_per_chrom: trace positions per chromosome.
        n_linkage_signals: planted variants, at most one per chromosome.
        n_assoc: number of association tests (m).
        n_assoc_signals: tests placed at planted variants with mean signal_mean.
        signal_mean: mean of the statistic at a true signal.
        trace_correlation_length: AR(1) coefficient is exp(-1 / length), in positions.
        bump_height: peak of the trace mean at a planted variant.
        bump_half_width: positions from the peak to where the mean returns to 0.
    """

    n_chrom: int = 23
    positions_per_chrom: int = 2000
    n_linkage_signals: int = 20
    n_assoc: int = 10_000
    n_assoc_signals: int = 20
    signal_mean: float = 3.2
    trace_correlation_length: float = 25.0
    bump_height: float = 3.5
    bump_half_width: float = 100.0

    def __post_init__(self):
        for name in ("n_chrom", "positions_per_chrom", "n_assoc"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")
        if self.n_linkage_signals < 0 or self.n_assoc_signals < 0:
            raise DomainError("signal counts must be nonnegative")
        if self.n_linkage_signals > self.n_chrom:
            raise DomainError(
                f"cannot place {self.n_linkage_signals} variants one per chromosome on {self.n_chrom} chromosomes"
            )
        if self.n_assoc_signals > self.n_linkage_signals:
            raise DomainError("association signals sit at planted variants, so n_assoc_signals <= n_linkage_signals")
        if self.n_assoc_signals > self.n_assoc:
            raise DomainError("more association signals than tests")
        if not self.trace_correlation_length > 0:
            raise DomainError("trace_correlation_length must be positive")
        if not self.bump_half_width > 0:
            raise DomainError("bump_half_width must be positive")

    @property
    def ar_coefficient(self) -> float:
        return math.exp(-1.0 / self.trace_correlation_length)


@dataclass(frozen=True, eq=False)
class LinkageStudy:
    """One synthetic study.

    Attributes:
        trace: (n_chrom, positions_per_chrom) linkage Z values.
        trace_mean: the deterministic bump component of the trace.
        variants: (chrom, position) of each planted variant.
        assoc_chrom, assoc_pos: location of each association test.
        assoc_stats: association statistics, N(0, 1) or N(signal_mean, 1).
        truth: True at the tests that are signals.
    """

    config: GenomeConfig
    trace: np.ndarray
    trace_mean: np.ndarray
    variants: tuple
    assoc_chrom: np.ndarray
    assoc_pos: np.ndarray
    assoc_stats: np.ndarray
    truth: np.ndarray
    seed: int

    @property
    def m(self) -> int:
        return int(self.assoc_stats.size)

    @property
    def signal_positions(self) -> np.ndarray:
        return np.flatnonzero(self.truth)

    @property
    def p_values(self) -> np.ndarray:
        return distfn.upper_tail(self.assoc_stats)

    @property
    def assoc_trace(self) -> np.ndarray:
        return self.trace[self.assoc_chrom, self.assoc_pos]


def _ar1(rng, n_rows, n_cols, phi):
    e = rng.standard_normal((n_rows, n_cols))
    scale = math.sqrt(1.0 - phi * phi)
    e[:, 0] /= scale
    return signal.lfilter([scale], [1.0, -phi], e, axis=1)


def synth_genome(config: GenomeConfig, seed: int) -> LinkageStudy:
    """Draw a study; the same (config, seed) always gives the same arrays."""
    return _synth(config, np.random.default_rng(seed), seed)


def _synth(config: GenomeConfig, rng: np.random.Generator, seed) -> LinkageStudy:
    c = config
    chroms = rng.choice(c.n_chrom, size=c.n_linkage_signals, replace=False)
    positions = rng.integers(0, c.positions_per_chrom, size=c.n_linkage_signals)
    mean = np.zeros((c.n_chrom, c.positions_per_chrom))
    grid = np.arange(c.positions_per_chrom)
    for ch, pos in zip(chroms, positions):
        bump = c.bump_height * np.maximum(0.0, 1.0 - np.abs(grid - pos) / c.bump_half_width)
        mean[ch] = np.maximum(mean[ch], bump)
    trace = mean + _ar1(rng, c.n_chrom, c.positions_per_chrom, c.ar_coefficient)

    assoc_chrom = rng.integers(0, c.n_chrom, size=c.n_assoc)
    assoc_pos = rng.integers(0, c.positions_per_chrom, size=c.n_assoc)
    truth = np.zeros(c.n_assoc, dtype=bool)
    if c.n_assoc_signals:
        slots = rng.choice(c.n_assoc, size=c.n_assoc_signals, replace=False)
        assoc_chrom[slots] = chroms[: c.n_assoc_signals]
        assoc_pos[slots] = positions[: c.n_assoc_signals]
        truth[slots] = True
    stats = rng.standard_normal(c.n_assoc) + np.where(truth, c.signal_mean, 0.0)
    return LinkageStudy(
        config=c,
        trace=trace,
        trace_mean=mean,
        variants=tuple((int(a), int(b)) for a, b in zip(chroms, positions)),
        assoc_chrom=assoc_chrom,
        assoc_pos=assoc_pos,
        assoc_stats=stats,
        truth=truth,
        seed=seed,
    )


def upweighted_mask(study: LinkageStudy, epsilon) -> np.ndarray:
    """Tests whose trace value lies in the top epsilon quantile of the genome-wide trace."""
    check_probability("epsilon", epsilon)
    cut = np.quantile(study.trace, 1.0 - epsilon)
    return study.assoc_trace > cut


def trace_to_binary_weights(study: LinkageStudy, epsilon, B) -> WeightVector:
    """Raw weight B on tests in the top epsilon of the trace, 1 elsewhere, rescaled to mean one.

    The two-valued scheme uses the realized fraction of up-weighted tests, so
    the budget holds exactly.
    """
    if B < 1:
        raise DomainError(f"B must be >= 1, got {B!r}")
    mask = upweighted_mask(study, epsilon)
    k = int(mask.sum())
    if B == 1 or k in (0, study.m):
        return WeightVector.uniform(study.m)
    scheme = BinaryWeightScheme.from_ratio(k / study.m, B, study.m, k=k)
    return scheme.expand(np.flatnonzero(mask))


def run_experiment(study: LinkageStudy, scheme, alpha, procedure="bonferroni") -> MCOutcome:
    """Apply a weighted procedure to the study's p-values and tally against the planted truth."""
    if procedure not in PROCEDURES:
        raise DomainError(f"unknown procedure {procedure!r}; choose from {sorted(PROCEDURES)}")
    rejected = PROCEDURES[procedure](study.p_values, scheme, alpha).mask
    return MCOutcome.tally(rejected, study.truth)


SURFACE_COLUMNS = (
    "epsilon",
    "B",
    "mean_discoveries",
    "mean_true",
    "avg_power",
    "power_se",
    "fwer",
    "fwer_se",
)


@dataclass(frozen=True, eq=False)
class SimReport:
    """Per-cell summaries of a replicated simulation.

    Attributes:
        cells: (epsilon, B) for each column of the tallies.
        true_positives, false_positives: (reps, cells) counts; every cell of
            a replicate shares the same simulated study.
        m1: number of true signals per study.
    """

    cells: tuple
    true_positives: np.ndarray
    false_positives: np.ndarray
    m1: int
    alpha: float
    reps: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "reps", int(self.true_positives.shape[0]))

    def cell_index(self, epsilon, B) -> int:
        return self.cells.index((epsilon, B))

    def fwer(self, j) -> MCEstimate:
        return MCEstimate.from_indicators(self.false_positives[:, j] > 0)

    def power(self, j) -> tuple:
        """Mean and SE of the per-replicate fraction of signals found."""
        frac = self.true_positives[:, j] / max(self.m1, 1)
        return float(frac.mean()), float(frac.std(ddof=1) / math.sqrt(self.reps)) if self.reps > 1 else 0.0

    def rows(self):
        out = []
        for j, (eps, B) in enumerate(self.cells):
            tp = self.true_positives[:, j]
            fp = self.false_positives[:, j]
            pw, pw_se = self.power(j)
            f = self.fwer(j)
            out.append((eps, B, float((tp + fp).mean()), float(tp.mean()), pw, pw_se, f.estimate, f.se))
        return out


def power_surface(
    config: GenomeConfig,
    epsilon_grid=(0.01, 0.05, 0.1, 0.2),
    B_grid=tuple(range(1, 51)),
    reps=100,
    alpha=0.05,
    seed=0,
    procedure="bonferroni",
    workers=1,
) -> SimReport:
    """Discoveries over an (epsilon, B) grid, with one fresh study per replicate.

    All grid cells of a replicate see the same study, so differences
    between cells are paired.
    """
    if not len(epsilon_grid) or not len(B_grid):
        raise DomainError("grids must be nonempty")
    check_probability("alpha", alpha)
    cells = tuple((float(e), float(b)) for e in epsilon_grid for b in B_grid)

    def one(rng, rep):
        study = _synth(config, rng, seed)
        tp = np.empty(len(cells), dtype=int)
        fp = np.empty(len(cells), dtype=int)
        for j, (eps, B) in enumerate(cells):
            out = run_experiment(study, trace_to_binary_weights(study, eps, B), alpha, procedure)
            tp[j], fp[j] = out.true_positives, out.false_positives
        return tp, fp

    results = run_replicates(one, reps, seed, stream=1, workers=workers)
    tp = np.array([r[0] for r in results])
    fp = np.array([r[1] for r in results])
    return SimReport(cells=cells, true_positives=tp, false_positives=fp, m1=config.n_assoc_signals, alpha=alpha)


WEIGHT_SCHEMES = ("unit", "random", "extreme", "lognormal")


def fixed_weights(scheme, m, seed=0, floor=1e-3) -> WeightVector:
    """Fixed weight vectors for null FWER checks.

    "unit" is all ones; "random" is m times a flat Dirichlet draw (fixed by
    seed); "extreme" puts `floor` on every hypothesis but the first, which
    takes the rest of the budget.
    """
    if scheme == "unit":
        return WeightVector.uniform(m)
    if scheme == "random":
        rng = replicate_rng(seed, 0, stream=99)
        return WeightVector.normalize(rng.dirichlet(np.ones(m)))
    if scheme == "extreme":
        w = np.full(m, floor)
        w[0] = m - (m - 1) * floor
        return WeightVector.normalize(w)
    raise DomainError(f"no fixed weights for scheme {scheme!r}")


def fwer_mc(
    m=1000,
    alpha=0.05,
    reps=20000,
    seed=0,
    scheme="unit",
    procedure="bonferroni",
    weights=None,
    lognormal_c=1.0,
    workers=1,
) -> MCEstimate:
    """Monte Carlo familywise error with all m hypotheses null (uniform p-values).

    Args:
        scheme: "unit", "random" or "extreme" fixed weights, or "lognormal",
            where each replicate draws W_j = exp(c V_j - c^2/2) from
            auxiliary V_j ~ N(0, 1) independent of the p-values. Ignored when
            `weights` is given.
        procedure: "bonferroni", "holm" or "bh" (fixed weights only).
        lognormal_c: the constant c of the random-weight rule.
    """
    if reps < 1000:
        raise DomainError(f"reps must be at least 1000, got {reps}")
    check_probability("alpha", alpha)
    if scheme not in WEIGHT_SCHEMES and weights is None:
        raise DomainError(f"unknown scheme {scheme!r}; choose from {WEIGHT_SCHEMES}")
    if procedure not in PROCEDURES:
        raise DomainError(f"unknown procedure {procedure!r}")
    level = alpha / m

    if weights is None and scheme == "lognormal":
        if procedure != "bonferroni":
            raise DomainError("random weights are supported for weighted Bonferroni only")

        def one(rng, _rep):
            p = rng.random(m)
            v = rng.standard_normal(m)
            w = np.exp(lognormal_c * v - lognormal_c * lognormal_c / 2.0)
            return bool(np.any(p <= level * w))

    else:
        w = weights if weights is not None else fixed_weights(scheme, m, seed)
        w = np.asarray(w, dtype=float)
        if w.shape != (m,):
            raise DomainError(f"expected {m} weights")
        if procedure == "bonferroni":
            cut = level * w

            def one(rng, _rep):
                return bool(np.any(rng.random(m) <= cut))

        else:
            proc = PROCEDURES[procedure]
            wv = WeightVector(w)

            def one(rng, _rep):
                return len(proc(rng.random(m), wv, alpha)) > 0

    hits = run_replicates(one, reps, seed, stream=2, workers=workers)
    return MCEstimate.from_indicators(hits)
