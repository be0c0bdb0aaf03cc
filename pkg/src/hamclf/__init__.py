"""Nonparametric classification with missing data via a hard-thresholded anova decomposition."""
from .anova import FiniteDistribution, decompose, ordered_bell, reconstruct, sigma_sq
from .estimator import FittedHam, HamHyperParams, compute_k, compute_tau, fit, select_omega
from .harness import ExperimentSpec, minimax_rate, run_experiment
from .lattice import Pattern, is_antichain, lower_set, pattern_set, upper_complement
from .scenarios import Scenario

__version__ = "0.1.0"

__all__ = [
    "ExperimentSpec", "FiniteDistribution", "FittedHam", "HamHyperParams", "Pattern", "Scenario",
    "compute_k", "compute_tau", "decompose", "fit", "is_antichain", "lower_set", "minimax_rate",
    "ordered_bell", "pattern_set", "reconstruct", "run_experiment", "select_omega", "sigma_sq",
    "upper_complement",
]
