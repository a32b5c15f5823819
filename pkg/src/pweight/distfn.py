"""Tail-accurate normal and one-degree-of-freedom chi-square distribution functions.

Everything downstream works with thresholds around 1e-8 or smaller, so the
upper tail is never formed as ``1 - cdf``. All functions accept scalars or
array-likes and return a Python float for scalar input.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError

_INV_SQRT_2PI = 0.3989422804014327


def _result(value, scalar):
    if scalar:
        return float(value)
    return value


def upper_tail(z):
    """Standard normal survival function, P(Z > z).

    Relative accuracy is ~1e-13 wherever the result is a normal double
    (z below about 37.5); beyond that the value is subnormal and only
    absolutely accurate.
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    return _result(special.ndtr(-z), scalar)


def lower_tail(z):
    """Standard normal cdf, P(Z <= z), computed as the upper tail at -z."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    return _result(special.ndtr(z), scalar)


def log_upper_tail(z):
    """log P(Z > z), finite far beyond the underflow point of `upper_tail`."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    return _result(special.log_ndtr(-z), scalar)


def density(z):
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    return _result(_INV_SQRT_2PI * np.exp(-0.5 * z * z), scalar)


def upper_quantile(p):
    """Inverse of `upper_tail`: the z with P(Z > z) = p.

    A rational-approximation start (Cephes ``ndtri``) is polished with one
    Halley step against `upper_tail`, so ``upper_tail(upper_quantile(p))``
    reproduces ``p`` to ~1e-14 relative error down to p = 1e-300.

    Raises:
        DomainError: if any p is outside the open interval (0, 1).
    """
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    bad = ~((p > 0.0) & (p < 1.0))
    if np.any(bad):
        raise DomainError(f"upper_quantile requires 0 < p < 1, got {np.asarray(p)[bad].ravel()[0]!r}")
    z = -special.ndtri(p)
    phi = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (special.ndtr(-z) - p) / phi
        step = t / (1.0 - 0.5 * z * t)
    z = np.where(phi > 0.0, z + step, z)
    return _result(z, scalar)


def upper_quantile_ext(p):
    """`upper_quantile` extended to the closed interval: p <= 0 gives +inf and p >= 1 gives -inf.

    This is the threshold convention used for weights: a zero weight can
    never reject, and a level at or above one always rejects.
    """
    scalar = np.ndim(p) == 0
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(np.isnan(p)):
        raise DomainError("upper_quantile_ext: NaN probability")
    z = np.where(p <= 0.0, np.inf, -np.inf)
    inner = (p > 0.0) & (p < 1.0)
    if inner.any():
        z[inner] = upper_quantile(p[inner])
    if scalar:
        return float(z[0])
    return z


def noncentral_chisq1_upper_tail(x, lam):
    """P(chi2_1(lam) > x) for the one-degree-of-freedom noncentral chi-square.

    Uses the identity with two normal tails, which keeps full relative
    accuracy in the far tail.

    Raises:
        DomainError: for negative x or negative noncentrality.
    """
    scalar = np.ndim(x) == 0 and np.ndim(lam) == 0
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(x < 0) or np.any(lam < 0):
        raise DomainError("noncentral_chisq1_upper_tail requires x >= 0 and lambda >= 0")
    rx = np.sqrt(x)
    rl = np.sqrt(lam)
    return _result(special.ndtr(rl - rx) + special.ndtr(-rx - rl), scalar)


def z_threshold(alpha, m):
    """Bonferroni cutoff z_{alpha/m}."""
    return upper_quantile(alpha / m)
