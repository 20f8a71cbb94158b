"""Confidence balls for the wavelet coefficient vector.

A ball is ``{mu : ||mu - mu_hat||^2 <= radius2}`` with

    radius2 = tau * z_alpha / sqrt(n) + SURE(fitted tuning)

where ``tau^2 = 2 sigma^4`` for soft thresholding and the modulator estimate
``tau_hat^2`` for the monotone modulator.  Unknown sigma is handled either by
plugging in the high-component estimate or by the union of known-sigma balls
over a confidence interval for sigma^2 (the "double" set).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import (
    DEFAULT_RHO,
    ModulationPlan,
    apply_shrinkage,
    minimize_sure,
    modulator_sure,
    monotone_modulator,
    total_sure,
    universal_schedule,
)
from .variance import SigmaEstimate, high_component_sigma2, sigma_interval, z_upper
from .wavelets import CoefficientVector

__all__ = [
    "METHODS",
    "SIGMA_MODES",
    "TAU_FORMS",
    "ConfidenceBall",
    "DoubleSet",
    "fit_plan",
    "radius_universal",
    "radius_sure",
    "tau2_modulator",
    "radius_modulator",
    "tau2_plugin",
    "known_sigma_ball",
    "plugin_ball",
    "double_set",
    "ball_contains",
    "dilate_for_function_space",
]

METHODS = ("universal", "sure-global", "sure-level", "modulator")
SIGMA_MODES = ("known", "plugin", "double")
# How the signal term of the modulator variance is estimated; see tau2_modulator.
TAU_FORMS = ("unbiased", "printed")
DEFAULT_TAU_FORM = "unbiased"


@dataclass(frozen=True)
class ConfidenceBall:
    center: CoefficientVector
    radius2: float
    alpha: float
    method: str
    sigma_mode: str = "known"
    sigma: float = float("nan")
    sure: float = float("nan")
    tau2: float = float("nan")
    plan: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.radius2 >= 0.0:
            raise ValueError(f"squared radius must be non-negative, got {self.radius2}")

    @property
    def radius(self) -> float:
        return math.sqrt(self.radius2)

    @property
    def n(self) -> int:
        return self.center.n

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "sigma_mode": self.sigma_mode,
            "sigma": self.sigma,
            "radius2": self.radius2,
            "n": self.center.n,
            "J0": self.center.shape.coarsest_level,
            "filter": self.center.filter_name,
            "center": self.center.values.tolist(),
        }


@dataclass(frozen=True)
class DoubleSet:
    """Union of known-sigma balls over a grid spanning the sigma^2 interval."""

    balls: tuple[tuple[float, ConfidenceBall], ...]
    q_interval: tuple[float, float]
    alpha: float
    alpha_tilde: float
    method: str

    @property
    def max_radius2(self) -> float:
        return max(b.radius2 for _, b in self.balls)

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "alpha_tilde": self.alpha_tilde,
            "sigma_mode": "double",
            "q_interval": list(self.q_interval),
            "balls": [{"sigma2": s2, **b.to_record()} for s2, b in self.balls],
        }


def _radius2(tau: float, z: float, n: int, sure: float) -> float:
    # SURE can be negative enough to push the sum below zero
    return max(tau * z / math.sqrt(n) + sure, 0.0)


def fit_plan(coeffs: CoefficientVector, method: str, sigma: float, rho: float = DEFAULT_RHO):
    """Tune the estimator ``method`` at noise level ``sigma``; returns the plan."""
    if method == "universal":
        return universal_schedule(coeffs, sigma)
    if method == "sure-global":
        return minimize_sure(coeffs, "global", sigma, rho)
    if method == "sure-level":
        return minimize_sure(coeffs, "levelwise", sigma, rho)
    if method == "modulator":
        return monotone_modulator(coeffs, sigma)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _threshold_ball(coeffs, schedule, sigma, alpha, method, sigma_mode):
    n = coeffs.n
    sure = total_sure(coeffs, schedule)
    tau2 = 2.0 * sigma**4
    r2 = _radius2(math.sqrt(tau2), z_upper(alpha), n, sure)
    return ConfidenceBall(
        apply_shrinkage(coeffs, schedule), r2, alpha, method, sigma_mode, sigma, sure, tau2, schedule
    )


def radius_universal(coeffs: CoefficientVector, sigma: float, alpha: float) -> ConfidenceBall:
    """Ball around the universal-threshold fit: ``sqrt(2) sigma^2 z_alpha / sqrt(n) + SURE``."""
    return _threshold_ball(coeffs, universal_schedule(coeffs, sigma), sigma, alpha, "universal", "known")


def radius_sure(coeffs: CoefficientVector, schedule, sigma: float, alpha: float) -> ConfidenceBall:
    method = {"global": "sure-global", "levelwise": "sure-level"}.get(schedule.mode, schedule.mode)
    return _threshold_ball(coeffs, schedule, sigma, alpha, method, "known")


def tau2_modulator(
    coeffs: CoefficientVector, plan: ModulationPlan, sigma: float, form: str = DEFAULT_TAU_FORM
) -> float:
    """Variance estimate of the modulator pivot.

    ``(2 sigma^4 / n) sum (2 xi - 1)^2 + 4 sigma^2 * signal term``.  The
    signal term estimates ``sum mu^2 (1 - xi)^2``:

    * ``"unbiased"``: ``sum (x^2 - sigma^2/n) (1 - xi)^2``, clipped at zero
      (``x^2 - sigma^2/n`` is unbiased for ``mu^2``);
    * ``"printed"``: ``sum (x^2 - sigma^2/n)^2 (1 - xi)^2``.
    """
    n = coeffs.n
    xi = plan.per_coefficient(coeffs.shape)
    first = 2.0 * sigma**4 / n * np.sum((2.0 * xi - 1.0) ** 2)
    excess = coeffs.values**2 - sigma**2 / n
    if form == "unbiased":
        signal = max(float(np.sum(excess * (1.0 - xi) ** 2)), 0.0)
    elif form == "printed":
        signal = float(np.sum(excess**2 * (1.0 - xi) ** 2))
    else:
        raise ValueError(f"unknown tau form {form!r}; expected one of {TAU_FORMS}")
    return float(first + 4.0 * sigma**2 * signal)


def radius_modulator(
    coeffs: CoefficientVector,
    plan: ModulationPlan,
    sigma: float,
    alpha: float,
    tau2: float | None = None,
    form: str = DEFAULT_TAU_FORM,
) -> ConfidenceBall:
    if tau2 is None:
        tau2 = tau2_modulator(coeffs, plan, sigma, form)
    sure = modulator_sure(coeffs, plan, sigma)
    r2 = _radius2(math.sqrt(tau2), z_upper(alpha), coeffs.n, sure)
    return ConfidenceBall(
        apply_shrinkage(coeffs, plan), r2, alpha, "modulator", "known", sigma, sure, tau2, plan
    )


def tau2_plugin(
    coeffs: CoefficientVector,
    plan: ModulationPlan,
    sigma_est: SigmaEstimate,
    form: str = DEFAULT_TAU_FORM,
) -> float:
    """Modulator variance with estimated sigma, plus the cost of estimating it.

    Replacing sigma by sigma_hat shifts the SURE by ``(sigma_hat^2 - sigma^2) * m``
    with ``m = mean(2 xi - 1)``.

    * ``external`` estimates are independent of the coefficients, which adds
      ``U^2 sigma_hat^4 m^2``.
    * The ``high-component`` estimate is built from the finest half F of the
      same coefficients, so the shift is correlated with the pivot.  The exact
      variance folds it into each coefficient's weights::

          (2 s^4 / n) sum (2 xi - 1 - 2 m 1_F)^2 + 4 s^2 sum mu^2 (1 - xi + 2 m 1_F)^2

      Its ``m^2`` part equals the external term at ``U = 2``; dropping the
      cross terms overstates the variance (for a pure-noise signal, 6 sigma^4
      instead of 2 sigma^4).
    """
    n = coeffs.n
    xi = plan.per_coefficient(coeffs.shape)
    s2 = sigma_est.sigma2_hat
    m = float(np.mean(2.0 * xi - 1.0))
    if sigma_est.source != "high-component":
        return tau2_modulator(coeffs, plan, math.sqrt(s2), form) + sigma_est.U**2 * s2**2 * m**2
    finest = np.zeros(n)
    finest[n // 2 :] = 1.0
    noise_w = 2.0 * xi - 1.0 - 2.0 * m * finest
    signal_w = 1.0 - xi + 2.0 * m * finest
    first = 2.0 * s2**2 / n * np.sum(noise_w**2)
    excess = coeffs.values**2 - s2 / n
    if form == "unbiased":
        signal = max(float(np.sum(excess * signal_w**2)), 0.0)
    elif form == "printed":
        signal = float(np.sum(excess**2 * signal_w**2))
    else:
        raise ValueError(f"unknown tau form {form!r}; expected one of {TAU_FORMS}")
    return float(first + 4.0 * s2 * signal)


def known_sigma_ball(
    coeffs: CoefficientVector,
    method: str,
    sigma: float,
    alpha: float,
    rho: float = DEFAULT_RHO,
    tau_form: str = DEFAULT_TAU_FORM,
) -> ConfidenceBall:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    plan = fit_plan(coeffs, method, sigma, rho)
    if method == "modulator":
        return radius_modulator(coeffs, plan, sigma, alpha, form=tau_form)
    ball = _threshold_ball(coeffs, plan, sigma, alpha, method, "known")
    return ball


def plugin_ball(
    coeffs: CoefficientVector,
    method: str,
    alpha: float,
    rho: float = DEFAULT_RHO,
    sigma_est: SigmaEstimate | None = None,
    tau_form: str = DEFAULT_TAU_FORM,
) -> ConfidenceBall:
    """Unknown-sigma ball: sigma_hat from the finest half replaces sigma everywhere."""
    if sigma_est is None:
        sigma_est = high_component_sigma2(coeffs)
    sigma_hat = sigma_est.sigma_hat
    plan = fit_plan(coeffs, method, sigma_hat, rho)
    if method == "modulator":
        tau2 = tau2_plugin(coeffs, plan, sigma_est, tau_form)
        ball = radius_modulator(coeffs, plan, sigma_hat, alpha, tau2=tau2)
    else:
        ball = _threshold_ball(coeffs, plan, sigma_hat, alpha, method, "known")
    return replace(ball, sigma_mode="plugin")


def double_set(
    coeffs: CoefficientVector,
    method: str,
    alpha: float,
    grid_size: int = 21,
    condition: str = "S2",
    rho: float = DEFAULT_RHO,
    sigma_est: SigmaEstimate | None = None,
    tau_form: str = DEFAULT_TAU_FORM,
) -> DoubleSet:
    """Union of level ``1 - alpha~`` known-sigma balls over the level ``1 - alpha~`` interval for sigma^2.

    ``alpha~ = alpha / 2`` when sigma is estimated from the same data (condition
    ``"S2"``) and ``1 - sqrt(1 - alpha)`` for an independent estimate (``"S1"``).
    ``grid_size = 1`` keeps only the interval midpoint.
    """
    if grid_size < 1:
        raise ValueError("grid_size must be at least 1")
    if condition == "S2":
        alpha_t = alpha / 2.0
    elif condition == "S1":
        alpha_t = 1.0 - math.sqrt(1.0 - alpha)
    else:
        raise ValueError(f"condition must be 'S1' or 'S2', got {condition!r}")
    if sigma_est is None:
        sigma_est = high_component_sigma2(coeffs)
    lo, hi = sigma_interval(sigma_est, coeffs.n, alpha_t)
    if grid_size == 1:
        grid = np.array([0.5 * (lo + hi)])
    elif hi == lo:
        grid = np.array([lo])
    else:
        grid = np.linspace(lo, hi, grid_size)
        grid[0], grid[-1] = lo, hi
    balls = tuple(
        (float(s2), replace(known_sigma_ball(coeffs, method, math.sqrt(s2), alpha_t, rho, tau_form), sigma_mode="double"))
        for s2 in grid
    )
    return DoubleSet(balls, (lo, hi), alpha, alpha_t, method)


def _as_values(mu, n: int) -> np.ndarray:
    vals = mu.values if isinstance(mu, CoefficientVector) else np.asarray(mu, dtype=float)
    if vals.shape != (n,):
        raise ValueError(f"expected {n} coefficients, got shape {vals.shape}")
    return vals


def ball_contains(region: ConfidenceBall | DoubleSet, mu) -> bool:
    """Closed-ball membership; a double set contains ``mu`` if any member ball does."""
    if isinstance(region, DoubleSet):
        return any(ball_contains(b, mu) for _, b in region.balls)
    diff = _as_values(mu, region.n) - region.center.values
    return bool(float(np.dot(diff, diff)) <= region.radius2)


def dilate_for_function_space(ball: ConfidenceBall, delta: float) -> ConfidenceBall:
    """Grow the squared radius by ``delta * log(n) / sqrt(n)`` for statements about the curve itself."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    n = ball.n
    return replace(ball, radius2=ball.radius2 + delta * math.log(n) / math.sqrt(n))
