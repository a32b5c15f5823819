"""Optimal p-value weights.

For one-sided tests with known means xi_j the weights maximizing average
power under a mean-one budget are

    rho_c(xi) = (m / alpha) * upper_tail(xi / 2 + c / xi)   for xi > 0, else 0,

with the scalar c fixed by the budget. Equivalently, hypothesis j is
rejected when T_j > xi_j / 2 + c / xi_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import distfn
from .errors import DomainError, InfeasibleError
from .hypotheses import (
    NEGLIGIBLE_MEAN,
    EffectConfiguration,
    MixtureSpec,
    WeightVector,
    check_probability,
    ks_distance,
)

_BRACKET_LIMIT = 1e300


def _log_tail_sum(c, locs, log_counts):
    terms = log_counts + special.log_ndtr(-(locs / 2.0 + c / locs))
    top = terms.max()
    if not np.isfinite(top):
        return top
    return top + math.log(np.exp(terms - top).sum())


def solve_budget(locations, counts, target):
    """Find c with sum_i counts_i * upper_tail(x_i/2 + c/x_i) = target.

    Only entries with x_i > NEGLIGIBLE_MEAN take part. The left side is
    continuous and strictly decreasing in c, from sum(counts) at -inf to 0
    at +inf, so the root is unique whenever 0 < target < sum(counts). The
    bracket is found by doubling away from 0 and refined by bisection on
    the log of the left side, which stays finite where the tails underflow.

    Raises:
        InfeasibleError: if the positive locations cannot carry the target.
    """
    locations = np.asarray(locations, dtype=float)
    counts = np.asarray(counts, dtype=float)
    keep = (locations > NEGLIGIBLE_MEAN) & (counts > 0)
    if not keep.any():
        raise DomainError("no positive means: optimal weights are undefined")
    locs = locations[keep]
    total = counts[keep].sum()
    if not target < total:
        raise InfeasibleError(
            f"alternatives carry total mass {total:.6g}, which cannot reach the budget target {target:.6g}"
        )
    log_counts = np.log(counts[keep])
    log_target = math.log(target)

    def g(c):
        return _log_tail_sum(c, locs, log_counts) - log_target

    if g(0.0) > 0:
        lo, hi = 0.0, 1.0
        while g(hi) > 0:
            lo, hi = hi, hi * 2.0
            if hi > _BRACKET_LIMIT:
                raise InfeasibleError("could not bracket c")
    else:
        lo, hi = -1.0, 0.0
        while g(lo) <= 0:
            lo, hi = lo * 2.0, lo
            if lo < -_BRACKET_LIMIT:
                raise InfeasibleError("could not bracket c")
    if g(hi) == 0.0:
        return hi
    return optimize.bisect(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=2000)


def rho(xi, c, alpha, m):
    """Optimal weight for mean `xi` at normalizing constant `c` (vectorized in xi)."""
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.zeros_like(xi)
    pos = xi > NEGLIGIBLE_MEAN
    out[pos] = (m / alpha) * np.exp(distfn.log_upper_tail(xi[pos] / 2.0 + c / xi[pos]))
    return float(out[0]) if scalar else out


def power_at_optimum(xi, c):
    """Power of an alternative with mean xi under rho_c weights: upper_tail(c/xi - xi/2)."""
    scalar = np.ndim(xi) == 0
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    out = np.zeros_like(xi)
    pos = xi > NEGLIGIBLE_MEAN
    out[pos] = distfn.upper_tail(c / xi[pos] - xi[pos] / 2.0)
    return float(out[0]) if scalar else out


@dataclass(frozen=True, eq=False)
class OptimalWeightSolution:
    """Optimal weights for an effect configuration.

    Attributes:
        c: normalizing constant.
        weights: rho_c(xi_j), rescaled to mean exactly one.
        oracle_power: average power over alternatives under these weights.
        residual: |mean(rho_c(xi)) - 1| before rescaling.
    """

    c: float
    weights: WeightVector
    oracle_power: float
    residual: float


@dataclass(frozen=True, eq=False)
class MixtureWeightSolution:
    """Optimal weights for a mixture of means: one weight per atom."""

    c: float
    atom_weights: np.ndarray
    oracle_power: float
    residual: float
    mixture: MixtureSpec

    def weight_at(self, location) -> float:
        idx = np.flatnonzero(self.mixture.locations == location)
        if idx.size == 0:
            raise KeyError(location)
        return float(self.atom_weights[idx[0]])


def solve_c(config: EffectConfiguration, alpha) -> OptimalWeightSolution:
    """Optimal weights for known means: solve (1/m) sum_j rho_c(xi_j) = 1.

    Raises:
        DomainError: if no mean is positive, or the configuration is two-sided.
    """
    check_probability("alpha", alpha)
    if config.two_sided:
        raise DomainError("optimal weights are defined for one-sided alternatives")
    locs, counts = np.unique(config.means, return_counts=True)
    c = solve_budget(locs, counts, alpha)
    raw = rho(config.means, c, alpha, config.m)
    residual = abs(raw.mean() - 1.0)
    weights = WeightVector.normalize(raw)
    alt = config.means > 0
    oracle = float(power_at_optimum(config.means[alt], c).sum() / alt.sum())
    return OptimalWeightSolution(c=c, weights=weights, oracle_power=oracle, residual=residual)


def solve_c_mixture(mixture: MixtureSpec, alpha, m) -> MixtureWeightSolution:
    """Optimal weights when means follow `mixture`: solve sum_i q_i rho_c(x_i) = 1."""
    check_probability("alpha", alpha)
    c = solve_budget(mixture.locations, mixture.masses, alpha / m)
    w = rho(mixture.locations, c, alpha, m)
    residual = abs(float(np.sum(mixture.masses * w)) - 1.0)
    alt = mixture.locations > 0
    alt_mass = mixture.masses[alt].sum()
    oracle = float(np.sum(mixture.masses[alt] * power_at_optimum(mixture.locations[alt], c)) / alt_mass)
    return MixtureWeightSolution(c=c, atom_weights=w, oracle_power=oracle, residual=residual, mixture=mixture)


def equivalent_cutoffs(solution, config: EffectConfiguration) -> np.ndarray:
    """Statistic cutoffs t_j = xi_j/2 + c/xi_j; +inf where the weight is zero.

    Rejecting T_j > t_j is the same event as P_j <= alpha w_j / m under the
    optimal weights.
    """
    c = solution.c if hasattr(solution, "c") else float(solution)
    xi = config.means
    out = np.full(xi.shape, np.inf)
    pos = xi > NEGLIGIBLE_MEAN
    out[pos] = xi[pos] / 2.0 + c / xi[pos]
    return out


@dataclass(frozen=True)
class DiscontinuityExample:
    """Two nearby mean distributions whose optimal weights differ sharply.

    Q puts mass a on xi and the rest on 0; Q-tilde moves mass gamma from 0
    to a small u. The weight on xi under Q is 1/a, under Q-tilde about
    1/(gamma K + a).
    """

    A: float
    B: float
    u: float
    xi: float
    c: float
    c_tilde_solved: float
    w_on_xi_under_Q: float
    w_on_xi_under_Qtilde: float
    w_on_u_under_Qtilde: float
    ratio: float
    ks_distance: float


def discontinuity_example(m, alpha, a, gamma, K, c) -> DiscontinuityExample:
    """Construct xi and u so that c solves the Q-tilde budget and w(u)/w(xi) = K.

    With A = z(alpha / (m (gamma K + a))) and B = z(K alpha / (m (gamma K + a))),
    xi = A + sqrt(A^2 - 2c) and u = B - sqrt(B^2 - 2c) satisfy
    xi/2 + c/xi = A and u/2 + c/u = B. Both weights are then obtained by
    solving the budget from scratch under Q and Q-tilde.

    Raises:
        InfeasibleError: naming the violated condition.
    """
    check_probability("alpha", alpha)
    check_probability("a", a)
    check_probability("gamma", gamma)
    if a + gamma > 1:
        raise InfeasibleError(f"a + gamma = {a + gamma} exceeds 1")
    if not K > 0:
        raise InfeasibleError("K must be positive")
    if not c > 0:
        raise InfeasibleError("c must be positive so that u > 0")
    denom = m * (gamma * K + a)
    pa, pb = alpha / denom, K * alpha / denom
    for name, p in (("alpha/(m(gamma K + a))", pa), ("K alpha/(m(gamma K + a))", pb)):
        if not 0 < p < 1:
            raise InfeasibleError(f"{name} = {p:.6g} must lie in (0, 1)")
    A = distfn.upper_quantile(pa)
    B = distfn.upper_quantile(pb)
    if A <= 0 or A * A < 2 * c:
        raise InfeasibleError(f"need A > 0 and A^2 >= 2c (A = {A:.6g}, c = {c:.6g})")
    if B <= 0 or B * B < 2 * c:
        raise InfeasibleError(f"need B > 0 and B^2 >= 2c (B = {B:.6g}, c = {c:.6g})")
    xi = A + math.sqrt(A * A - 2 * c)
    u = B - math.sqrt(B * B - 2 * c)
    q = MixtureSpec.from_atoms([(1 - a, 0.0), (a, xi)])
    q_tilde = MixtureSpec.from_atoms([(1 - a - gamma, 0.0), (gamma, u), (a, xi)])
    sol_q = solve_c_mixture(q, alpha, m)
    sol_qt = solve_c_mixture(q_tilde, alpha, m)
    w_q = sol_q.weight_at(xi)
    w_qt = sol_qt.weight_at(xi)
    return DiscontinuityExample(
        A=A,
        B=B,
        u=u,
        xi=xi,
        c=c,
        c_tilde_solved=sol_qt.c,
        w_on_xi_under_Q=w_q,
        w_on_xi_under_Qtilde=w_qt,
        w_on_u_under_Qtilde=sol_qt.weight_at(u),
        ratio=w_q / w_qt,
        ks_distance=ks_distance(q, q_tilde),
    )
