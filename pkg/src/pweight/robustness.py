"""Robustness of weighted testing to misspecified weights.

Covers the two-valued robustness function R(B, eps), the worst-case
condition for general weights, the safe zone, the turnaround point of
R in B, and the least favorable misspecification of the mean mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from . import distfn
from .errors import DomainError
from .hypotheses import check_probability
from .power import power_one_sided

_RTOL = 4 * np.finfo(float).eps


def binary_weights(B, epsilon):
    """Normalized (w1, w0) for raw ratio B on a fraction epsilon of hypotheses."""
    denom = epsilon * B + (1.0 - epsilon)
    return B / denom, 1.0 / denom


def robustness_two_point(B, epsilon, xi, alpha, m) -> float:
    """Gain from up-weighting minus loss from down-weighting an alternative with mean xi.

    R = pi(xi, w1) + pi(xi, w0) - 2 pi(xi, 1), where (w1, w0) is the
    normalized two-valued scheme with raw ratio B on a fraction epsilon.
    """
    check_probability("epsilon", epsilon)
    if B < 1:
        raise DomainError(f"B must be >= 1, got {B!r}")
    if B == 1:
        return 0.0
    w1, w0 = binary_weights(B, epsilon)
    return (
        power_one_sided(xi, w1, alpha, m)
        + power_one_sided(xi, w0, alpha, m)
        - 2.0 * power_one_sided(xi, 1.0, alpha, m)
    )


def _lower_at(w, xi, alpha, m):
    # Phi(z_{alpha w/m} - xi) with z = +inf at w = 0 and -inf once the level reaches 1
    z = distfn.upper_quantile_ext(alpha * w / m)
    return distfn.upper_tail(xi - z)


@dataclass(frozen=True)
class WorstCaseCondition:
    R_bB: float
    robust: bool
    Delta: float


def worst_case_condition(xi, b, B, alpha, m) -> WorstCaseCondition:
    """Evaluate R_{b,B}(xi) = Phi(z_{aB/m} - xi) + Phi(z_{ab/m} - xi) - 2 Phi(z_{a/m} - xi).

    `b` is the smallest weight and `B` the smallest weight above one. The
    worst-case gain-minus-loss over all alternatives equals -R_{b,B}, so the
    weights are robust at xi when R_{b,B} <= 0.
    """
    check_probability("alpha", alpha)
    if not (0 <= b <= 1 <= B):
        raise DomainError(f"need 0 <= b <= 1 <= B, got b={b!r}, B={B!r}")
    at_B = _lower_at(B, xi, alpha, m)
    at_b = _lower_at(b, xi, alpha, m)
    at_1 = _lower_at(1.0, xi, alpha, m)
    r = at_B + at_b - 2.0 * at_1
    return WorstCaseCondition(R_bB=r, robust=r <= 0.0, Delta=at_1 - at_B)


def worst_case_robustness(xi, weights, alpha, m) -> float:
    """Worst-case robustness R(xi) of an explicit weight vector.

    min over weights above one of the power gain, minus max over weights
    below one of the power loss, all at a common alternative mean xi.
    Empty sets contribute zero.
    """
    w = np.asarray(weights, dtype=float)
    base = power_one_sided(xi, 1.0, alpha, m)
    up = w[w > 1]
    down = w[w < 1]
    gain = float(np.min(power_one_sided(xi, up, alpha, m) - base)) if up.size else 0.0
    loss = float(np.max(base - power_one_sided(xi, down, alpha, m))) if down.size else 0.0
    return gain - loss


def safe_zone_bound(B, alpha, m) -> float:
    """z_{alpha/m} - 1 / (z_{alpha/m} - z_{B alpha/m}).

    Below this mean the weights are robust even when the smallest weight is
    zero. The value can be negative (for B near 2), in which case it
    certifies nothing.
    """
    check_probability("alpha", alpha)
    if B < 2:
        raise DomainError(f"the safe-zone bound needs B >= 2, got {B!r}")
    if not B * alpha / m < 1:
        raise DomainError("B alpha / m must be below 1")
    z1 = distfn.upper_quantile(alpha / m)
    zB = distfn.upper_quantile(B * alpha / m)
    return z1 - 1.0 / (z1 - zB)


@dataclass(frozen=True)
class Turnaround:
    """Shape summary of R(., eps) in B.

    Attributes:
        B0: the sign change of R beyond its maximum (inf if none below 1e12).
        B_star: maximizer of R on [1, B0].
        R_at_Bstar: maximum value of R.
        R_at_B0: residual of the root.
        finite: False when R stays positive up to the bracket limit.
    """

    epsilon: float
    xi: float
    B0: float
    B_star: float
    R_at_Bstar: float
    R_at_B0: float
    finite: bool


def turnaround(epsilon, alpha, m, xi=None, bracket_limit=1e12) -> Turnaround:
    """Locate the turnaround point B0(eps) and the best ratio B*(eps).

    The default mean is the marginal effect z_{alpha/m}, whose unweighted
    power is one half.
    """
    check_probability("epsilon", epsilon)
    if xi is None:
        xi = distfn.upper_quantile(alpha / m)

    def R(B):
        return robustness_two_point(B, epsilon, xi, alpha, m)

    lo = 1.0 + 1e-6
    while R(lo) <= 0:
        lo = 1.0 + (lo - 1.0) / 2.0
        if lo - 1.0 < 1e-15:
            raise DomainError("R is not positive just above B = 1")
    hi = max(2.0, lo * 2.0)
    while R(hi) > 0:
        lo, hi = hi, hi * 2.0
        if hi > bracket_limit:
            best = _maximize(R, 1.0, hi)
            return Turnaround(epsilon, xi, math.inf, best, R(best), math.nan, False)
    B0 = optimize.bisect(R, lo, hi, xtol=1e-12, rtol=_RTOL, maxiter=500)
    best = _maximize(R, 1.0, B0)
    return Turnaround(epsilon, xi, B0, best, R(best), R(B0), True)


def _maximize(f, lo, hi, tol=1e-8):
    """Golden-section search for the maximum of a unimodal f on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol * max(1.0, abs(a)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


@dataclass(frozen=True)
class WorstCaseReport:
    """Least favorable misspecification of Q = (1-a) d0 + a d_xi.

    gamma m nulls are mistaken for alternatives with mean u. With
    `restrict_u`, u ranges over [0, xi]; otherwise over u >= 0.

    Attributes:
        xi0: z_{alpha/(m(gamma+a))}.
        xi_star: z_{alpha/m} + sqrt(z_{alpha/m}^2 - z_q^2), q = alpha(1-a)/(m gamma);
            None when undefined.
        C_of_xi: sup of c(u) over 0 <= u <= xi.
        c_star: sup of c(u) over u >= 0.
        u_star: least favorable u for the requested mode.
        inf_power: minimal power at xi for the requested mode.
        bonf_power: unweighted power at xi.
        beats_bonf: inf_power >= bonf_power - 1e-12.
    """

    xi: float
    xi0: float
    xi_star: Optional[float]
    C_of_xi: float
    c_star: float
    u_star: float
    inf_power: float
    bonf_power: float
    beats_bonf: bool
    restrict_u: bool


def misspec_budget_gap(c, u, xi, a, gamma, alpha, m) -> float:
    """gamma upper_tail(u/2 + c/u) + a upper_tail(xi/2 + c/xi) - alpha/m."""
    return gamma * distfn.upper_tail(u / 2.0 + c / u) + a * distfn.upper_tail(xi / 2.0 + c / xi) - alpha / m


def least_favorable_c(xi, a, gamma, alpha, m) -> float:
    """Root c* of gamma upper_tail(sqrt(2c)) + a upper_tail(xi/2 + c/xi) = alpha/m, c >= 0.

    Raises:
        DomainError: when the left side is already below alpha/m at c = 0.
    """

    def r(c):
        return gamma * distfn.upper_tail(math.sqrt(2.0 * c)) + a * distfn.upper_tail(xi / 2.0 + c / xi) - alpha / m

    if r(0.0) < 0:
        raise DomainError("no nonnegative c*: gamma/2 + a upper_tail(xi/2) is below alpha/m")
    hi = 1.0
    while r(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError("could not bracket c*")
    if r(0.0) == 0.0:
        return 0.0
    return optimize.bisect(r, 0.0, hi, xtol=1e-14, rtol=_RTOL, maxiter=2000)


def misspec_worst_case(xi, a, gamma, alpha, m, restrict_u=False) -> WorstCaseReport:
    """Worst-case power at xi when gamma m nulls are taken for alternatives at mean u."""
    check_probability("alpha", alpha)
    check_probability("a", a)
    check_probability("gamma", gamma)
    if not xi > 0:
        raise DomainError("xi must be positive")
    if not (alpha / m <= gamma + a <= 1):
        raise DomainError(f"need alpha/m <= gamma + a <= 1, got gamma + a = {gamma + a!r}")
    xi0 = distfn.upper_quantile_ext(alpha / (m * (gamma + a)))
    c_star = least_favorable_c(xi, a, gamma, alpha, m)
    if xi <= xi0:
        C = xi * xi0 - xi * xi / 2.0
    else:
        C = c_star
    z1 = distfn.upper_quantile(alpha / m)
    q = alpha * (1.0 - a) / (m * gamma)
    xi_star = None
    if 0 < q < 1:
        zq = distfn.upper_quantile(q)
        if z1 * z1 >= zq * zq:
            xi_star = z1 + math.sqrt(z1 * z1 - zq * zq)
    if restrict_u:
        c_used = C
        u_star = xi if xi <= xi0 else math.sqrt(2.0 * C)
    else:
        c_used = c_star
        u_star = math.sqrt(2.0 * c_star)
    inf_power = distfn.upper_tail(c_used / xi - xi / 2.0)
    bonf = distfn.upper_tail(z1 - xi)
    return WorstCaseReport(
        xi=xi,
        xi0=xi0,
        xi_star=xi_star,
        C_of_xi=C,
        c_star=c_star,
        u_star=u_star,
        inf_power=inf_power,
        bonf_power=bonf,
        beats_bonf=inf_power >= bonf - 1e-12,
        restrict_u=restrict_u,
    )


CURVE_COLUMNS = ("xi", "worst_power", "bonf_power", "oracle_power", "u_star")


def worst_case_power_curves(a, gamma, alpha, m, xi_grid, restrict_u=False):
    """Rows (xi, worst-case power, Bonferroni power, oracle power, least favorable u).

    Oracle power uses the correct mixture, where every alternative gets
    weight 1/a.
    """
    rows = []
    for xi in np.asarray(xi_grid, dtype=float):
        rep = misspec_worst_case(float(xi), a, gamma, alpha, m, restrict_u=restrict_u)
        oracle = power_one_sided(float(xi), 1.0 / a, alpha, m)
        rows.append((float(xi), rep.inf_power, rep.bonf_power, oracle, rep.u_star))
    return rows
