"""Blinded sample size re-estimation for two-arm trials with a normal outcome.

The central rule sizes the trial with a conservative upper confidence limit
of the common variance, computable from label-free interim data, at a
confidence level calibrated so that a lower bound on power meets the target.
"""

__version__ = "0.1.0"

from .calibration import CalibrationResult, calibrate_gamma, gamma_table, lower_bound_power
from .design import DesignSpec, Method, Rounding, SampleSizeResult, initial_sample_size, reestimate
from .estimators import PilotSummary, VarianceEstimate
from .power_lab import (
    SimulationReport,
    TruthScenario,
    sample_size_distribution,
    simulate_trials,
)

__all__ = [
    "CalibrationResult", "DesignSpec", "Method", "PilotSummary", "Rounding", "SampleSizeResult",
    "SimulationReport", "TruthScenario", "VarianceEstimate", "calibrate_gamma", "gamma_table",
    "initial_sample_size", "lower_bound_power", "reestimate", "sample_size_distribution",
    "simulate_trials",
]
