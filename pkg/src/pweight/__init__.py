"""Weighted multiple hypothesis testing.

Error-controlling procedures with p-value weights, optimal weights for
known effect sizes, robustness of weighting to misspecification, two-valued
weight designs, grouped data-driven weights and a synthetic association
study simulator.
"""

from .designer import BinaryWeightScheme, binary_scheme, design_max_count, design_min_power
from .distfn import density, lower_tail, upper_quantile, upper_tail
from .errors import BatteryFormatError, ContractError, DomainError, InfeasibleError
from .estimator import group_moments, mom_chisq, mom_normal, weights_from_groups
from .hypotheses import EffectConfiguration, MixtureSpec, RejectionSet, TestBattery, WeightVector
from .optimal import discontinuity_example, equivalent_cutoffs, solve_c, solve_c_mixture
from .power import average_power, power_one_sided, power_two_sided
from .procedures import bh, bonferroni, weighted_bh, weighted_bonferroni, weighted_holm

__version__ = "0.1.0"
