"""Data-driven grouped weights.

Tests are split into K groups. Within each group the statistics are
treated as a two-point mixture (null with probability 1 - pi, mean xi with
probability pi), whose parameters are estimated by the method of moments.
The estimated means feed the optimal-weight formula, the group weights are
blended toward their average, and the result is rescaled to sum to m.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import distfn
from .errors import ContractError, DomainError
from .hypotheses import TestBattery, WeightVector, check_probability
from .montecarlo import MCEstimate, run_replicates
from .optimal import rho, solve_budget

MODELS = ("normal", "chisq")
VARIANTS = ("classic", "derived")
DEFAULT_SMOOTH = 0.05
MIN_GROUP_SIZE = 20


def group_moments(stats):
    """Sample mean, unbiased sample variance and size of a group.

    Raises:
        DomainError: for fewer than two statistics.
    """
    x = np.asarray(stats, dtype=float).ravel()
    r = x.size
    if r < 2:
        raise DomainError(f"a group needs at least 2 statistics, got {r}")
    return float(x.mean()), float(x.var(ddof=1)), r


def mom_normal(Y, S2, r):
    """Method-of-moments (pi, xi) for T ~ (1 - pi) N(0, 1) + pi N(xi, 1).

    pi = Y^2 / (Y^2 + S2 - 1) and xi = Y / pi. When the denominator is not
    positive or pi <= 1/r, xi is set to 0. pi is clamped to [0, 1].
    """
    if r < 2:
        raise DomainError(f"r must be at least 2, got {r}")
    denom = Y * Y + S2 - 1.0
    if denom <= 0:
        return 0.0, 0.0
    pi = Y * Y / denom
    if not pi > 1.0 / r:
        return min(max(pi, 0.0), 1.0), 0.0
    xi = Y / pi
    return min(pi, 1.0), xi


def mom_chisq(Y, S2, r, variant="classic"):
    """Method-of-moments (pi, xi) for chi-square(1) statistics with noncentrality xi^2.

    Args:
        Y: sample mean of the chi-square statistics.
        S2: their sample variance.
        r: group size.
        variant: "classic" uses xi^2 = (S2 + Y^2 + 3)/(Y - 1), the usual
            published form, which is biased for this mixture; "derived" uses
            xi^2 = (S2 + Y^2 - 3)/(Y - 1) - 6, which matches the first two
            moments of the mixture exactly.

    Returns:
        (pi, xi) with pi = (Y - 1)/xi^2, or xi = 0 unless Y > 1 and
        1/r < pi < (r - 1)/r.
    """
    if r < 2:
        raise DomainError(f"r must be at least 2, got {r}")
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    if not Y > 1:
        return 0.0, 0.0
    if variant == "classic":
        lam = (S2 + Y * Y + 3.0) / (Y - 1.0)
    else:
        lam = (S2 + Y * Y - 3.0) / (Y - 1.0) - 6.0
    if not lam > 0:
        return 0.0, 0.0
    pi = (Y - 1.0) / lam
    if not (1.0 / r < pi < (r - 1.0) / r):
        return min(max(pi, 0.0), 1.0), 0.0
    return pi, math.sqrt(lam)


@dataclass(frozen=True)
class GroupEstimate:
    group_id: object
    r_k: int
    Y_k: float
    S2_k: float
    pi_hat: float
    xi_hat: float


@dataclass(frozen=True, eq=False)
class SmoothedWeights:
    """Per-group weights before and after smoothing, and the per-test vector.

    Attributes:
        raw: w(xi_hat_k), the optimal weights at the estimated means.
        smoothed: (1 - gamma) raw_k + gamma mean(raw), rescaled so the
            per-test weights sum to m.
        fallback: True when every estimated mean was zero and unit weights
            were used.
    """

    gamma_smooth: float
    estimates: tuple
    raw: np.ndarray
    smoothed: np.ndarray
    per_test: WeightVector
    fallback: bool = False


def _estimate(Y, S2, r, model, variant):
    if model == "normal":
        return mom_normal(Y, S2, r)
    return mom_chisq(Y, S2, r, variant)


def group_weights(stats, groups, model="normal", gamma_smooth=DEFAULT_SMOOTH, alpha=0.05, variant="classic", warn=True):
    """Estimate grouped weights from raw statistics and group labels.

    Args:
        stats: one statistic per test; N(xi, 1) draws for the normal model,
            chi-square values for the chi-square model.
        groups: group label per test.
        model: "normal" or "chisq".
        gamma_smooth: blend toward the average group weight, in [0, 1].
        alpha: familywise level used in the weight formula.
        variant: chi-square estimator variant, see `mom_chisq`.
        warn: emit UserWarnings for small groups and the unit-weight fallback.
    """
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}; choose from {MODELS}")
    check_probability("gamma_smooth", gamma_smooth, open_interval=False)
    check_probability("alpha", alpha)
    x = np.asarray(stats, dtype=float)
    labels, inv = np.unique(np.asarray(groups), return_inverse=True)
    inv = inv.ravel()
    if x.shape != inv.shape:
        raise ContractError("need one group label per statistic")
    m = x.size
    r = np.bincount(inv, minlength=labels.size)
    if np.any(r < 2):
        raise DomainError("every group needs at least 2 tests")
    if warn and np.any(r < MIN_GROUP_SIZE):
        warnings.warn(f"groups smaller than {MIN_GROUP_SIZE} give unstable estimates", stacklevel=2)
    Y = np.bincount(inv, weights=x, minlength=labels.size) / r
    dev = x - Y[inv]
    S2 = np.bincount(inv, weights=dev * dev, minlength=labels.size) / (r - 1)

    estimates = []
    xi_hat = np.zeros(labels.size)
    for k, label in enumerate(labels):
        pi_k, xi_k = _estimate(float(Y[k]), float(S2[k]), int(r[k]), model, variant)
        xi_hat[k] = xi_k
        estimates.append(GroupEstimate(label.item() if hasattr(label, "item") else label, int(r[k]), float(Y[k]), float(S2[k]), pi_k, xi_k))

    if not np.any(xi_hat > 0):
        if warn:
            warnings.warn("no group has a positive estimated mean; using unit weights", stacklevel=2)
        ones = np.ones(labels.size)
        return SmoothedWeights(gamma_smooth, tuple(estimates), np.zeros(labels.size), ones, WeightVector.uniform(m), True)

    pos = xi_hat > 0
    if r[pos].sum() <= alpha:
        raise DomainError("the groups with positive estimated means are too small to carry the budget")
    c = solve_budget(xi_hat, r, alpha)
    raw = rho(xi_hat, c, alpha, m)
    blended = (1.0 - gamma_smooth) * raw + gamma_smooth * raw.mean()
    if np.all(blended == blended[0]):
        smoothed = np.ones(labels.size)
    else:
        smoothed = blended * (m / np.sum(r * blended))
    per_test = WeightVector(smoothed[inv])
    return SmoothedWeights(gamma_smooth, tuple(estimates), raw, smoothed, per_test, False)


def battery_statistics(battery: TestBattery, model="normal") -> np.ndarray:
    """Statistics fed to the estimator: T for the normal model, T^2 for chi-square.

    Batteries without a statistic column get T recovered from the p-values
    (one-sided z for the normal model, two-sided z for chi-square).
    """
    if battery.statistics is not None:
        t = battery.statistics
    else:
        p = np.clip(battery.p_values, 1e-300, 1.0 - 1e-16)
        t = distfn.upper_quantile(p / 2.0 if model == "chisq" else p)
    t = np.asarray(t, dtype=float)
    return t * t if model == "chisq" else t


def weights_from_groups(battery: TestBattery, model="normal", gamma_smooth=DEFAULT_SMOOTH, alpha=0.05, variant="classic") -> SmoothedWeights:
    """Grouped data-driven weights for a battery with group labels."""
    if battery.groups is None:
        raise ContractError("the battery has no group column")
    return group_weights(battery_statistics(battery, model), battery.groups, model, gamma_smooth, alpha, variant)


@dataclass(frozen=True)
class EstimatedWeightsMC:
    """Monte Carlo summary of estimate-then-test on the same data.

    Attributes:
        fwer: familywise error of weighted Bonferroni with estimated weights.
        fwer_unweighted: the same for plain Bonferroni on the same replicates.
        true_weighted: per-replicate true discoveries with estimated weights.
        true_unweighted: per-replicate true discoveries without weights.
    """

    fwer: MCEstimate
    fwer_unweighted: MCEstimate
    true_weighted: np.ndarray
    true_unweighted: np.ndarray

    @property
    def fraction_not_worse(self) -> float:
        return float(np.mean(self.true_weighted >= self.true_unweighted))


def fwer_of_estimated_weights(
    n_groups=20,
    group_size=500,
    reps=5000,
    alpha=0.05,
    gamma_smooth=DEFAULT_SMOOTH,
    model="normal",
    enriched_pi=0.0,
    enriched_xi=0.0,
    variant="classic",
    seed=0,
    workers=1,
) -> EstimatedWeightsMC:
    """Familywise error when weights are estimated from the data they are applied to.

    Group 0 holds round(enriched_pi * group_size) alternatives with mean
    enriched_xi (one-sided) or noncentrality enriched_xi^2 (chi-square);
    every other test is null. False positives are counted over nulls only.
    """
    m = n_groups * group_size
    groups = np.repeat(np.arange(n_groups), group_size)
    n_alt = int(round(enriched_pi * group_size))
    truth = np.zeros(m, dtype=bool)
    truth[:n_alt] = True
    shift = np.where(truth, enriched_xi, 0.0)
    level = alpha / m

    def one(rng, _rep):
        t = rng.standard_normal(m) + shift
        if model == "chisq":
            stat = t * t
            p = distfn.noncentral_chisq1_upper_tail(stat, 0.0)
        else:
            stat = t
            p = distfn.upper_tail(t)
        # warnings.catch_warnings is not thread-safe, so switch them off at the source
        w = group_weights(stat, groups, model, gamma_smooth, alpha, variant, warn=False).per_test.weights
        rej_w = p <= level * w
        rej_u = p <= level
        return (
            bool(np.any(rej_w & ~truth)),
            bool(np.any(rej_u & ~truth)),
            int(np.count_nonzero(rej_w & truth)),
            int(np.count_nonzero(rej_u & truth)),
        )

    out = run_replicates(one, reps, seed, stream=3, workers=workers)
    arr = np.array(out, dtype=float)
    return EstimatedWeightsMC(
        fwer=MCEstimate.from_indicators(arr[:, 0]),
        fwer_unweighted=MCEstimate.from_indicators(arr[:, 1]),
        true_weighted=arr[:, 2].astype(int),
        true_unweighted=arr[:, 3].astype(int),
    )
