"""Core domain types: effect configurations, test batteries, weights and mixtures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import distfn
from .errors import ContractError, DomainError

# Means in (0, NEGLIGIBLE_MEAN] are treated as nulls when building weights.
NEGLIGIBLE_MEAN = 1e-12
MEAN_ONE_TOL = 1e-9


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EffectConfiguration:
    """The vector of standardized mean shifts, one per hypothesis.

    For one-sided testing a hypothesis is false (an alternative) iff its
    mean is strictly positive; for two-sided testing iff it is nonzero.
    """

    means: np.ndarray
    two_sided: bool = False

    def __post_init__(self):
        means = _frozen_array(np.atleast_1d(self.means))
        if means.ndim != 1 or means.size < 1:
            raise ContractError("EffectConfiguration needs at least one mean")
        if not np.all(np.isfinite(means)):
            raise ContractError("EffectConfiguration means must be finite")
        object.__setattr__(self, "means", means)

    @property
    def m(self) -> int:
        return int(self.means.size)

    @property
    def is_alternative(self) -> np.ndarray:
        if self.two_sided:
            return self.means != 0.0
        return self.means > 0.0

    @property
    def m1(self) -> int:
        return int(np.count_nonzero(self.is_alternative))

    @property
    def m0(self) -> int:
        return self.m - self.m1


@dataclass(frozen=True, eq=False)
class TestBattery:
    """p-values for m hypotheses, with optional test statistics and group labels."""

    __test__ = False  # keep pytest from collecting this class

    ids: tuple
    p_values: np.ndarray
    statistics: Optional[np.ndarray] = None
    groups: Optional[np.ndarray] = None
    two_sided: bool = False

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        p = _frozen_array(self.p_values)
        if p.ndim != 1:
            raise ContractError("p_values must be one-dimensional")
        if len(ids) != p.size:
            raise ContractError(f"{len(ids)} ids but {p.size} p-values")
        if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
            raise ContractError("p-values must lie in [0, 1]")
        if len(set(ids)) != len(ids):
            raise ContractError("duplicate hypothesis ids")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "p_values", p)
        if self.statistics is not None:
            stats = _frozen_array(self.statistics)
            if stats.shape != p.shape:
                raise ContractError("statistics length differs from p-values")
            object.__setattr__(self, "statistics", stats)
        if self.groups is not None:
            groups = np.array(self.groups)
            if groups.shape != p.shape:
                raise ContractError("group labels length differs from p-values")
            groups.setflags(write=False)
            object.__setattr__(self, "groups", groups)

    @classmethod
    def from_pvalues(cls, p_values, ids=None, **kwargs) -> "TestBattery":
        p_values = np.asarray(p_values, dtype=float)
        if ids is None:
            ids = [f"h{j + 1}" for j in range(p_values.size)]
        return cls(ids=tuple(ids), p_values=p_values, **kwargs)

    @classmethod
    def from_statistics(cls, statistics, ids=None, two_sided=False, **kwargs) -> "TestBattery":
        """Battery whose p-values are the upper-tail (or two-sided) p-values of `statistics`."""
        t = np.asarray(statistics, dtype=float)
        if two_sided:
            p = distfn.noncentral_chisq1_upper_tail(t * t, 0.0)
        else:
            p = distfn.upper_tail(t)
        if ids is None:
            ids = [f"h{j + 1}" for j in range(t.size)]
        return cls(ids=tuple(ids), p_values=p, statistics=t, two_sided=two_sided, **kwargs)

    @property
    def m(self) -> int:
        return int(self.p_values.size)

    def sorted_order(self) -> np.ndarray:
        """Indices sorting p-values ascending; ties broken by original index."""
        return np.argsort(self.p_values, kind="stable")


def consistency_check(battery: TestBattery, tol: float = 1e-9) -> list:
    """Indices where the p-value disagrees with its test statistic.

    One-sided batteries are checked against ``upper_tail(T)``; two-sided ones
    against the central chi-square tail of ``T**2``.

    Returns:
        List of ``(index, p_value, expected)`` tuples; empty when consistent.
    """
    if battery.statistics is None:
        raise ContractError("consistency_check needs test statistics")
    t = battery.statistics
    if battery.two_sided:
        expected = distfn.noncentral_chisq1_upper_tail(t * t, 0.0)
    else:
        expected = distfn.upper_tail(t)
    bad = np.flatnonzero(np.abs(battery.p_values - expected) > tol)
    return [(int(j), float(battery.p_values[j]), float(expected[j])) for j in bad]


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Nonnegative p-value weights with mean one.

    Construct through `WeightVector.normalize` (any nonnegative input, rescaled)
    or directly when the input already satisfies the budget.
    """

    weights: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        w = _frozen_array(np.atleast_1d(self.weights))
        if w.ndim != 1 or w.size < 1:
            raise ContractError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ContractError("weights must be finite and nonnegative")
        if abs(w.mean() - 1.0) > MEAN_ONE_TOL:
            raise ContractError(f"weights must average to 1 (mean is {w.mean()!r})")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalize(cls, raw) -> "WeightVector":
        """Rescale nonnegative `raw` to mean one, recording the factor applied."""
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 1 or raw.size < 1:
            raise ContractError("weights must be a non-empty vector")
        if not np.all(np.isfinite(raw)) or np.any(raw < 0):
            raise ContractError("weights must be finite and nonnegative")
        total = raw.sum()
        if total <= 0:
            raise ContractError("weights are all zero; cannot normalize")
        if np.all(raw == raw[0]):
            return cls(np.ones_like(raw), scale=1.0 / raw[0])
        scale = raw.size / total
        return cls(raw * scale, scale=scale)

    @classmethod
    def uniform(cls, m: int) -> "WeightVector":
        return cls(np.ones(m))

    @property
    def m(self) -> int:
        return int(self.weights.size)

    def __len__(self):
        return self.m

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


@dataclass(frozen=True)
class RejectionSet:
    """Hypotheses rejected by a procedure, held as a boolean mask over 0..m-1."""

    mask: np.ndarray

    def __post_init__(self):
        mask = _frozen_array(self.mask, dtype=bool)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_indices(cls, indices, m: int) -> "RejectionSet":
        mask = np.zeros(m, dtype=bool)
        idx = np.asarray(list(indices), dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= m):
            raise ContractError("rejection index out of range")
        mask[idx] = True
        return cls(mask)

    @property
    def indices(self) -> frozenset:
        return frozenset(int(j) for j in np.flatnonzero(self.mask))

    @property
    def m(self) -> int:
        return int(self.mask.size)

    def __len__(self):
        return int(np.count_nonzero(self.mask))

    def __contains__(self, j):
        return 0 <= j < self.mask.size and bool(self.mask[j])

    def __eq__(self, other):
        if not isinstance(other, RejectionSet):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(np.all(self.mask == other.mask))

    def __hash__(self):
        return hash(self.mask.tobytes())

    def issubset(self, other: "RejectionSet") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def issuperset(self, other: "RejectionSet") -> bool:
        return other.issubset(self)


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    """Discrete distribution of alternative means: point masses at `locations`."""

    masses: np.ndarray
    locations: np.ndarray

    def __post_init__(self):
        masses = _frozen_array(np.atleast_1d(self.masses))
        locs = _frozen_array(np.atleast_1d(self.locations))
        if masses.shape != locs.shape or masses.ndim != 1:
            raise ContractError("masses and locations must be equal-length vectors")
        if np.any(masses < 0):
            raise ContractError("mixture masses must be nonnegative")
        if abs(masses.sum() - 1.0) > 1e-12:
            raise ContractError(f"mixture masses must sum to 1 (sum is {masses.sum()!r})")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "locations", locs)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple]) -> "MixtureSpec":
        """Build from ``(mass, location)`` pairs."""
        masses, locs = zip(*atoms)
        return cls(np.array(masses, dtype=float), np.array(locs, dtype=float))

    @classmethod
    def empirical(cls, config: EffectConfiguration) -> "MixtureSpec":
        locs, counts = np.unique(config.means, return_counts=True)
        return cls(counts / config.m, locs)

    @property
    def alternative_mass(self) -> float:
        return float(self.masses[self.locations > 0].sum())

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return (self.masses[None, :] * (self.locations[None, :] <= x.reshape(-1, 1))).sum(axis=1).reshape(x.shape)


def ks_distance(q1: MixtureSpec, q2: MixtureSpec) -> float:
    """Kolmogorov-Smirnov distance between two discrete distributions."""
    points = np.union1d(q1.locations, q2.locations)
    return float(np.max(np.abs(q1.cdf(points) - q2.cdf(points))))


@dataclass(frozen=True)
class MCOutcome:
    """Counts from one application of a procedure against known truth."""

    false_positives: int
    true_positives: int
    m0: int
    m1: int

    def __post_init__(self):
        if not (0 <= self.false_positives <= self.m0):
            raise ContractError("false positives must lie in [0, m0]")
        if not (0 <= self.true_positives <= self.m1):
            raise ContractError("true positives must lie in [0, m1]")

    @property
    def rejections(self) -> int:
        return self.false_positives + self.true_positives

    @classmethod
    def tally(cls, rejected: np.ndarray, truth: np.ndarray) -> "MCOutcome":
        rejected = np.asarray(rejected, dtype=bool)
        truth = np.asarray(truth, dtype=bool)
        return cls(
            false_positives=int(np.count_nonzero(rejected & ~truth)),
            true_positives=int(np.count_nonzero(rejected & truth)),
            m0=int(np.count_nonzero(~truth)),
            m1=int(np.count_nonzero(truth)),
        )


def check_probability(name, value, open_interval=True):
    if open_interval:
        ok = 0.0 < value < 1.0
    else:
        ok = 0.0 <= value <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise DomainError(f"{name} must lie in {bounds}, got {value!r}")
    return float(value)
