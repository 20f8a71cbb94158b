"""Noise-variance estimate from the finest coefficients and its confidence interval."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .wavelets import CoefficientVector

__all__ = ["SigmaEstimate", "z_upper", "high_component_sigma2", "external_sigma2", "sigma_interval"]


def z_upper(alpha: float) -> float:
    """Upper-tail ``alpha`` quantile of the standard Normal (``z_0.05 = 1.6449``)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(norm.isf(alpha))


@dataclass(frozen=True)
class SigmaEstimate:
    """Estimate of sigma^2 in squared y-units; ``U`` is its CLT scale, ``sqrt(n)(s2/sigma2 - 1) -> N(0, U^2)``."""

    sigma2_hat: float
    source: str = "high-component"
    U: float = 2.0

    def __post_init__(self):
        if self.sigma2_hat < 0:
            raise ValueError("variance estimate must be non-negative")

    @property
    def sigma_hat(self) -> float:
        return math.sqrt(self.sigma2_hat)


def high_component_sigma2(coeffs: CoefficientVector) -> SigmaEstimate:
    """``2 * sum of squared coefficients over the finest half`` (indices n/2+1 .. n).

    With coefficient noise variance sigma^2/n this is unbiased for sigma^2
    when the finest level carries no signal.
    """
    n = coeffs.n
    if n % 2:
        raise ValueError("high-component estimator needs an even number of coefficients")
    tail = coeffs.values[n // 2 :]
    return SigmaEstimate(float(2.0 * np.dot(tail, tail)), "high-component", 2.0)


def external_sigma2(value: float, U: float) -> SigmaEstimate:
    """Wrap an independent variance estimate supplied by the caller."""
    return SigmaEstimate(float(value), "external", float(U))


def sigma_interval(est: SigmaEstimate, n: int, alpha: float) -> tuple[float, float]:
    """Interval for sigma^2: ``s2 * [(1 - U z_{1-a/2}/sqrt n)^-1, (1 - U z_{a/2}/sqrt n)^-1]``.

    Take the elementwise square root for an interval on sigma.
    """
    z_hi = z_upper(alpha / 2.0)
    z_lo = -z_hi  # z_{1 - alpha/2}
    denom_upper = 1.0 - est.U * z_hi / math.sqrt(n)
    if denom_upper <= 0.0:
        raise ValueError(
            f"sample too small for the variance interval: 1 - U z/sqrt(n) = {denom_upper:.4g} <= 0"
        )
    lo = est.sigma2_hat / (1.0 - est.U * z_lo / math.sqrt(n))
    hi = est.sigma2_hat / denom_upper
    return lo, hi
