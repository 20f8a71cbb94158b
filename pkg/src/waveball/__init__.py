"""Wavelet confidence balls for nonparametric regression.

Soft-threshold and monotone-modulator estimators come with confidence balls
for the coefficient vector, with sigma known, plugged in, or covered by a
union of balls.  The package also derives intervals for linear functionals
and runs Monte Carlo coverage experiments.
"""

__version__ = "0.1.0"

from .confidence import (
    ConfidenceBall,
    DoubleSet,
    ball_contains,
    dilate_for_function_space,
    double_set,
    known_sigma_ball,
    plugin_ball,
)
from .estimators import ModulationPlan, ThresholdSchedule, minimize_sure, monotone_modulator
from .functionals import FunctionalInterval, LinearFunctional, functional_interval, local_average
from .harness import ExperimentConfig, CoverageReport, chisq_baseline_radius, fit_curve, run_coverage
from .signals import empirical_coefficients, generate_sample, true_coefficients
from .variance import high_component_sigma2, sigma_interval
from .wavelets import HAAR, SYMMLET8, TransformShape, dwt_forward, dwt_inverse

__all__ = [
    "ConfidenceBall",
    "CoverageReport",
    "DoubleSet",
    "ExperimentConfig",
    "FunctionalInterval",
    "HAAR",
    "LinearFunctional",
    "ModulationPlan",
    "SYMMLET8",
    "ThresholdSchedule",
    "TransformShape",
    "ball_contains",
    "chisq_baseline_radius",
    "dilate_for_function_space",
    "double_set",
    "dwt_forward",
    "dwt_inverse",
    "empirical_coefficients",
    "fit_curve",
    "functional_interval",
    "generate_sample",
    "high_component_sigma2",
    "known_sigma_ball",
    "local_average",
    "minimize_sure",
    "monotone_modulator",
    "plugin_ball",
    "run_coverage",
    "sigma_interval",
    "true_coefficients",
]
