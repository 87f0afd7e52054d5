"""Policy learning robust to Γ-biased sample selection.

Closed-form oracle policies from CATE and conditional CVaR thresholds,
end-to-end RU Regression training on RCT data, and an experiment harness.
"""
from .core import (
    ObservedData,
    ObservedSample,
    Policy,
    PotentialOutcomes,
    PotentialOutcomeSample,
    RobustnessConfig,
    apply_policy,
    potential_value,
)
from .estimator import RUPolicyLearner
from .risk import (
    EmpiricalDistribution,
    empirical_cvar,
    empirical_quantile,
    mixture_cvar,
    normal_cvar,
    robust_mean,
    zeta_of_gamma,
)

__version__ = "0.1.0"

__all__ = [
    "EmpiricalDistribution",
    "ObservedData",
    "ObservedSample",
    "Policy",
    "PotentialOutcomeSample",
    "PotentialOutcomes",
    "RUPolicyLearner",
    "RobustnessConfig",
    "apply_policy",
    "empirical_cvar",
    "empirical_quantile",
    "mixture_cvar",
    "normal_cvar",
    "potential_value",
    "robust_mean",
    "zeta_of_gamma",
]
