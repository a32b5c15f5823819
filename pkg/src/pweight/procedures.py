"""Error-controlling rejection procedures.

Each procedure takes a `TestBattery` (or a bare array of p-values) and,
for the weighted variants, weights with mean one. A hypothesis with zero
weight has ``Q = P/w = +inf`` and is never rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import distfn
from .errors import ContractError, DomainError
from .hypotheses import MEAN_ONE_TOL, RejectionSet, TestBattery, WeightVector, check_probability


def _pvalues(battery) -> np.ndarray:
    if isinstance(battery, TestBattery):
        return battery.p_values
    p = np.asarray(battery, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ContractError("p-values must be a non-empty vector")
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ContractError("p-values must lie in [0, 1]")
    return p


def _weights(weights, m) -> np.ndarray:
    w = np.asarray(weights.weights if isinstance(weights, WeightVector) else weights, dtype=float)
    if w.shape != (m,):
        raise ContractError(f"expected {m} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ContractError("weights must be finite and nonnegative")
    if abs(w.mean() - 1.0) > MEAN_ONE_TOL:
        raise ContractError(f"weights must average to 1 within {MEAN_ONE_TOL:g} (mean is {w.mean()!r})")
    return w


def weighted_pvalues(p, w) -> np.ndarray:
    """Q_j = P_j / w_j, with +inf wherever w_j = 0."""
    q = np.full(p.shape, np.inf)
    pos = w > 0
    q[pos] = p[pos] / w[pos]
    return q


def bonferroni(battery, alpha) -> RejectionSet:
    p = _pvalues(battery)
    return RejectionSet(p <= alpha / p.size)


def weighted_bonferroni(battery, weights, alpha) -> RejectionSet:
    """Reject H_j when P_j <= alpha * w_j / m."""
    check_probability("alpha", alpha)
    p = _pvalues(battery)
    w = _weights(weights, p.size)
    return RejectionSet((p <= alpha * w / p.size) & (w > 0))


def weighted_holm(battery, weights, alpha) -> RejectionSet:
    """Weighted Holm step-down.

    Hypotheses are visited in increasing order of Q = P/w. The i-th is
    rejected when ``P <= alpha * w / S``, S being the total weight of the
    hypotheses not yet rejected; the procedure stops at the first failure.
    S is capped at m so round-off in a mean-one weight vector can never
    make the first step stricter than weighted Bonferroni.
    """
    check_probability("alpha", alpha)
    p = _pvalues(battery)
    m = p.size
    w = _weights(weights, m)
    q = weighted_pvalues(p, w)
    order = np.lexsort((np.arange(m), q))
    remaining = np.cumsum(w[order][::-1])[::-1]
    remaining = np.minimum(remaining, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        passes = (w[order] > 0) & (p[order] <= alpha * w[order] / remaining)
    n_reject = m if passes.all() else int(np.argmin(passes))
    mask = np.zeros(m, dtype=bool)
    mask[order[:n_reject]] = True
    return RejectionSet(mask)


def _step_up(q, alpha) -> np.ndarray:
    m = q.size
    order = np.lexsort((np.arange(m), q))
    ranks = np.arange(1, m + 1)
    ok = q[order] <= alpha * ranks / m
    mask = np.zeros(m, dtype=bool)
    if ok.any():
        threshold = q[order][np.flatnonzero(ok)[-1]]
        mask = q <= threshold
    return mask


def bh(battery, alpha) -> RejectionSet:
    """Benjamini-Hochberg step-up: reject P_j <= max{P_(i) : P_(i) <= alpha i / m}."""
    check_probability("alpha", alpha)
    return RejectionSet(_step_up(_pvalues(battery), alpha))


def weighted_bh(battery, weights, alpha) -> RejectionSet:
    """BH step-up applied to Q_j = P_j / w_j."""
    check_probability("alpha", alpha)
    p = _pvalues(battery)
    w = _weights(weights, p.size)
    return RejectionSet(_step_up(weighted_pvalues(p, w), alpha))


def adjusted_pvalues(battery, weights=None, method="bonferroni") -> np.ndarray:
    """Adjusted p-values ("q-values" in the output files) for a procedure.

    Rejecting where the adjusted value is <= alpha reproduces the procedure
    up to floating-point ties at the boundary.
    """
    p = _pvalues(battery)
    m = p.size
    w = np.ones(m) if weights is None else _weights(weights, m)
    q = weighted_pvalues(p, w)
    if method == "bonferroni":
        return np.minimum(1.0, q * m)
    order = np.lexsort((np.arange(m), q))
    if method == "holm":
        remaining = np.minimum(np.cumsum(w[order][::-1])[::-1], m)
        stepped = np.maximum.accumulate(np.minimum(1.0, q[order] * remaining))
    elif method == "bh":
        ranks = np.arange(1, m + 1)
        stepped = np.minimum.accumulate(np.minimum(1.0, q[order] * m / ranks)[::-1])[::-1]
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.empty(m)
    out[order] = stepped
    return out


@dataclass(frozen=True)
class BHAsymptotic:
    """Limiting p-value threshold of BH when alternatives share one mean.

    Attributes:
        u_star: largest positive root of H(u) = beta_coef * u (0 if none found).
        beta_coef: (1/alpha - A0) / (1 - A0).
        A0: fraction of true nulls.
        alt_mean: common alternative mean.
        residual: |H(u*) - beta_coef u*| at the returned root.
        found: False when no positive root exists above 1e-300.
        within_bounds: alpha/m <= u* <= alpha.
    """

    u_star: float
    beta_coef: float
    A0: float
    alt_mean: float
    residual: float
    found: bool
    within_bounds: bool


def bh_asymptotic_threshold(alt_mean, A0, alpha, m) -> BHAsymptotic:
    """Solve H(u) = beta u, with H(u) the one-sided alternative p-value cdf."""
    check_probability("A0", A0)
    check_probability("alpha", alpha)
    if not alt_mean > 0:
        raise DomainError("alt_mean must be positive")
    beta = (1.0 / alpha - A0) / (1.0 - A0)

    def gap(log_u):
        u = math.exp(log_u)
        return distfn.upper_tail(distfn.upper_quantile(u) - alt_mean) - beta * u

    # gap > 0 just above the trivial root at 0, and gap(1) = 1 - beta < 0
    grid = np.linspace(math.log(1e-300), math.log(1.0 - 1e-12), 2000)
    values = np.array([gap(x) for x in grid])
    positive = np.flatnonzero(values > 0)
    if positive.size == 0:
        return BHAsymptotic(0.0, beta, A0, alt_mean, 0.0, False, False)
    i = positive[-1]
    log_u = optimize.bisect(gap, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    u = math.exp(log_u)
    residual = abs(distfn.upper_tail(distfn.upper_quantile(u) - alt_mean) - beta * u)
    within = alpha / m <= u <= alpha
    return BHAsymptotic(u, beta, A0, alt_mean, residual, True, within)


PROCEDURES = {
    "bonferroni": weighted_bonferroni,
    "holm": weighted_holm,
    "bh": weighted_bh,
}
