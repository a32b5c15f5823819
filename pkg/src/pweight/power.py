"""Power of weighted Bonferroni tests and its averages over alternatives."""

from __future__ import annotations

import numpy as np

from . import distfn
from .errors import ContractError, DomainError
from .hypotheses import EffectConfiguration, MixtureSpec, WeightVector, check_probability


def _threshold(w, alpha, m, two_sided):
    level = alpha * np.asarray(w, dtype=float) / m
    if two_sided:
        level = level / 2.0
    return distfn.upper_quantile_ext(level)


def power_one_sided(xi, w, alpha, m):
    """P(P_j <= alpha w / m) for T_j ~ N(xi, 1): upper_tail(z_{alpha w/m} - xi).

    Vectorized over `xi` and `w`. Zero weight gives power 0; a level
    alpha w / m >= 1 gives power 1.
    """
    scalar = np.ndim(xi) == 0 and np.ndim(w) == 0
    if np.any(np.asarray(w) < 0):
        raise DomainError("weights must be nonnegative")
    z = _threshold(w, alpha, m, False)
    with np.errstate(invalid="ignore"):
        out = distfn.upper_tail(np.asarray(z) - np.asarray(xi, dtype=float))
    return float(out) if scalar else out


def power_two_sided(xi, w, alpha, m):
    """Two-sided power: upper_tail(z - xi) + upper_tail(z + xi) with z = z_{alpha w / 2m}."""
    scalar = np.ndim(xi) == 0 and np.ndim(w) == 0
    if np.any(np.asarray(w) < 0):
        raise DomainError("weights must be nonnegative")
    level = alpha * np.asarray(w, dtype=float) / m
    z = np.asarray(_threshold(w, alpha, m, True))
    xi = np.asarray(xi, dtype=float)
    out = distfn.upper_tail(z - xi) + distfn.upper_tail(z + xi)
    out = np.where(level >= 1.0, 1.0, np.minimum(out, 1.0))
    return float(out) if scalar else out


def power(xi, w, alpha, m, two_sided=False):
    if two_sided:
        return power_two_sided(xi, w, alpha, m)
    return power_one_sided(xi, w, alpha, m)


def average_power(config: EffectConfiguration, weights, alpha) -> float:
    """Mean power over the alternatives of `config` under `weights`.

    Raises:
        DomainError: if the configuration has no alternatives.
    """
    check_probability("alpha", alpha)
    w = np.asarray(weights.weights if isinstance(weights, WeightVector) else weights, dtype=float)
    if w.shape != config.means.shape:
        raise ContractError("weights and configuration differ in length")
    alt = config.is_alternative
    if not alt.any():
        raise DomainError("average power is undefined without alternatives (m1 = 0)")
    pw = power(config.means[alt], w[alt], alpha, config.m, config.two_sided)
    return float(np.sum(pw) / alt.sum())


def average_power_mixture(mixture: MixtureSpec, weight_fn, alpha, m) -> float:
    """Average power when alternative means follow a discrete mixture.

    Args:
        mixture: atoms of the mean distribution.
        weight_fn: callable mapping a location to its weight, or a sequence
            of per-atom weights.
        alpha: familywise level.
        m: number of tests (sets the Bonferroni level alpha / m).
    """
    check_probability("alpha", alpha)
    if callable(weight_fn):
        w = np.array([weight_fn(x) for x in mixture.locations], dtype=float)
    else:
        w = np.asarray(weight_fn, dtype=float)
    if w.shape != mixture.locations.shape:
        raise ContractError("need one weight per atom")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    budget = float(np.sum(mixture.masses * w))
    if abs(budget - 1.0) > 1e-9:
        raise ContractError(f"weights must integrate to 1 under the mixture (got {budget!r})")
    alt = mixture.locations > 0
    alt_mass = mixture.masses[alt].sum()
    if not alt_mass > 0:
        raise DomainError("mixture has no mass on positive means")
    pw = power_one_sided(mixture.locations[alt], w[alt], alpha, m)
    return float(np.sum(mixture.masses[alt] * pw) / alt_mass)


def oracle_power(config: EffectConfiguration, alpha) -> float:
    """Average power under the optimal weights for `config`."""
    from .optimal import solve_c

    return solve_c(config, alpha).oracle_power
