"""Multi-operator spectrum sharing for small-cell networks.

Expected-rate analysis over Poisson deployments, a many-to-one swap
matching game between operators and resource blocks, per-SBS Q-learning
power control and a seeded Monte Carlo harness.
"""

from .analytic_rate import PowerPmf, RateProvider, expected_rate_conditional
from .config import ConfigError, NetworkConfig, config_from_flat
from .deployment import Deployment, sample_deployment
from .harness import ExperimentSpec, ResultSet, run_ensemble, run_trial, saturation_curve
from .matching import Hole, Matching, greedy_swap, mcmc_swap, social_welfare
from .qlearning import QTable, learn_pmf, q_update, select_action, value_iteration_oracle

__all__ = [
    "ConfigError", "Deployment", "ExperimentSpec", "Hole", "Matching", "NetworkConfig",
    "PowerPmf", "QTable", "RateProvider", "ResultSet", "config_from_flat",
    "expected_rate_conditional", "greedy_swap", "learn_pmf", "mcmc_swap", "q_update",
    "run_ensemble", "run_trial", "sample_deployment", "saturation_curve",
    "select_action", "social_welfare", "value_iteration_oracle",
]
