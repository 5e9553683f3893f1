"""Cascading bandits under adversarial click corruption.

Simulation toolkit for online learning to rank with a robust
calibrated mean-of-medians learner (MUCB-V), its corruption-agnostic
model-selection wrapper (M2UCB-V), and the CascadeUCB-V and
CascadeCBARBAR baselines.
"""

from robust_cascade.core import (
    CascadeFeedback,
    EnvironmentSpec,
    InvalidListError,
    RankedList,
    expected_reward,
    optimal_list,
    per_round_regret,
    sample_feedback,
)
from robust_cascade.corruption import (
    AdversaryStrategy,
    CorruptionBudget,
    corrupt,
    default_adversary,
)
from robust_cascade.estimators import (
    CalibrationParams,
    Estimate,
    SampleLog,
    calibrate,
    calibrated_mean_of_medians,
    empirical_mean,
    q_b,
    variance_proxy,
)

__version__ = "0.1.0"

__all__ = [
    "AdversaryStrategy",
    "CalibrationParams",
    "CascadeFeedback",
    "CorruptionBudget",
    "EnvironmentSpec",
    "Estimate",
    "InvalidListError",
    "RankedList",
    "SampleLog",
    "calibrate",
    "calibrated_mean_of_medians",
    "corrupt",
    "default_adversary",
    "empirical_mean",
    "expected_reward",
    "optimal_list",
    "per_round_regret",
    "q_b",
    "sample_feedback",
    "variance_proxy",
]
