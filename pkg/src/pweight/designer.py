"""Two-valued weight schemes and their closed-form optimal designs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import distfn
from .errors import DomainError, InfeasibleError
from .hypotheses import WeightVector, check_probability
from .power import power_one_sided


@dataclass(frozen=True)
class BinaryWeightScheme:
    """Weights w1 on a fraction epsilon of the hypotheses and w0 on the rest.

    w1 = B / (eps B + 1 - eps) and w0 = 1 / (eps B + 1 - eps), so that
    eps w1 + (1 - eps) w0 = 1.
    """

    epsilon: float
    B: float
    w1: float
    w0: float
    k: int
    m: int

    @classmethod
    def from_ratio(cls, epsilon, B, m, k=None) -> "BinaryWeightScheme":
        denom = epsilon * B + (1.0 - epsilon)
        if k is None:
            k = int(round(epsilon * m))
        return cls(epsilon=epsilon, B=B, w1=B / denom, w0=1.0 / denom, k=k, m=m)

    @property
    def budget(self) -> float:
        return self.epsilon * self.w1 + (1.0 - self.epsilon) * self.w0

    def expand(self, upweighted=None) -> WeightVector:
        """Length-m weight vector with w1 on `upweighted` (default: the first k).

        The vector is renormalized to mean one, which is a no-op when
        epsilon * m is an integer.
        """
        if upweighted is None:
            mask = np.zeros(self.m, dtype=bool)
            mask[: self.k] = True
        else:
            mask = np.zeros(self.m, dtype=bool)
            mask[np.asarray(upweighted)] = True
        raw = np.where(mask, self.w1, self.w0)
        if self.B == 1:
            return WeightVector(np.ones(self.m))
        return WeightVector.normalize(raw)


def binary_scheme(epsilon, B, m) -> BinaryWeightScheme:
    """Two-valued scheme with raw ratio B on round(epsilon m) of m hypotheses."""
    check_probability("epsilon", epsilon)
    if B < 1:
        raise DomainError(f"B must be >= 1, got {B!r}")
    scheme = BinaryWeightScheme.from_ratio(epsilon, B, m)
    if scheme.k in (0, m):
        warnings.warn(f"binary scheme is degenerate: round(epsilon m) = {scheme.k} of m = {m}", stacklevel=2)
    return scheme


@dataclass(frozen=True)
class DesignResult:
    scheme: BinaryWeightScheme
    target_power: float
    min_power: float
    c_value: float
    xi: float


def _marginal(alpha, m, xi):
    return distfn.upper_quantile(alpha / m) if xi is None else float(xi)


def design_min_power(epsilon, beta, alpha, m, xi: Optional[float] = None) -> DesignResult:
    """Maximize the minimum power while a fraction epsilon keeps power 1 - beta.

    All alternatives share the mean xi (default: the marginal effect
    z_{alpha/m}). The solution is c = upper_tail(xi + z_{1-beta}),
    B = c m (1 - eps) / (alpha - eps c m), with w1 = c m / alpha.

    Raises:
        InfeasibleError: when alpha - eps c m <= 0.
    """
    check_probability("epsilon", epsilon)
    check_probability("alpha", alpha)
    if not 0 < beta < 0.5:
        raise DomainError(f"beta must lie in (0, 1/2), got {beta!r}")
    xi = _marginal(alpha, m, xi)
    c = distfn.upper_tail(xi + distfn.upper_quantile(1.0 - beta))
    slack = alpha - epsilon * c * m
    if slack <= 0:
        raise InfeasibleError(
            f"alpha - eps c m = {slack:.6g} <= 0: cannot give a fraction {epsilon} power {1 - beta}"
        )
    B = c * m * (1.0 - epsilon) / slack
    scheme = BinaryWeightScheme.from_ratio(epsilon, B, m)
    return DesignResult(
        scheme=scheme,
        target_power=1.0 - beta,
        min_power=power_one_sided(xi, scheme.w0, alpha, m),
        c_value=c,
        xi=xi,
    )


def design_max_count(beta, delta, alpha, m, xi: Optional[float] = None) -> DesignResult:
    """Maximize the number of alternatives at power 1 - beta, keeping every power >= delta.

    w1 = (m/alpha) upper_tail(xi + z_{1-beta}), w0 = (m/alpha) upper_tail(xi + z_delta),
    eps = (1 - w0) / (w1 - w0). delta = 0 gives w0 = 0 and eps = 1/w1.
    k = floor(m eps) so the budget is never exceeded.

    Raises:
        InfeasibleError: unless w0 < 1 < w1.
    """
    check_probability("alpha", alpha)
    if not 0 < beta < 0.5:
        raise DomainError(f"beta must lie in (0, 1/2), got {beta!r}")
    if not 0 <= delta < 1 - beta:
        raise DomainError(f"delta must lie in [0, 1 - beta), got {delta!r}")
    xi = _marginal(alpha, m, xi)
    w1 = (m / alpha) * distfn.upper_tail(xi + distfn.upper_quantile(1.0 - beta))
    if delta == 0:
        w0 = 0.0
    else:
        w0 = (m / alpha) * distfn.upper_tail(xi + distfn.upper_quantile(delta))
    if not (w0 < 1.0 < w1):
        raise InfeasibleError(f"need w0 < 1 < w1, got w0 = {w0:.6g}, w1 = {w1:.6g}")
    epsilon = (1.0 - w0) / (w1 - w0)
    k = int(math.floor(m * epsilon))
    B = w1 / w0 if w0 > 0 else math.inf
    scheme = BinaryWeightScheme(epsilon=epsilon, B=B, w1=w1, w0=w0, k=k, m=m)
    return DesignResult(
        scheme=scheme,
        target_power=1.0 - beta,
        min_power=power_one_sided(xi, w0, alpha, m),
        c_value=alpha * w1 / m,
        xi=xi,
    )
