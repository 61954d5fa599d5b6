"""Cumulant estimation, posterior intervals, decay fits and max-entropy reconstruction."""

from .bayes import BayesResult, PosteriorConfig, bayesian_intervals
from .estimators import estimate_cumulants
from .fitting import FitResult, SweepPoint, find_tau_f, fit_decay
from .maxent import MaxEntSolution, check_feasible, maxent_pmf

__all__ = [
    "BayesResult", "PosteriorConfig", "bayesian_intervals", "estimate_cumulants", "FitResult",
    "SweepPoint", "find_tau_f", "fit_decay", "MaxEntSolution", "check_feasible", "maxent_pmf",
]
