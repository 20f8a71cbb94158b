"""Intervals for linear functionals of the curve, read off a confidence ball.

A linear functional acts on the coefficient vector as ``T(mu) = sum c_l mu_l``.
Over the ball ``||mu - mu_hat|| <= r`` its extremes are ``c . mu_hat -/+ r ||c||``
(Cauchy-Schwarz), so every interval is exact and all intervals built from one
ball hold simultaneously whenever the ball covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .confidence import ConfidenceBall, DoubleSet
from .wavelets import SYMMLET8, CoefficientVector, TransformShape, WaveletFilter, dwt_array

__all__ = [
    "LinearFunctional",
    "FunctionalInterval",
    "default_widening",
    "functional_interval",
    "local_average",
    "point_evaluator",
    "simultaneous_intervals",
]


@dataclass(frozen=True)
class LinearFunctional:
    coeffs: np.ndarray
    descriptor: str = ""

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("functional weights must be a finite 1-D array")
        object.__setattr__(self, "coeffs", c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __call__(self, mu) -> float:
        vals = mu.values if isinstance(mu, CoefficientVector) else np.asarray(mu, dtype=float)
        if vals.shape != self.coeffs.shape:
            raise ValueError(f"functional has {self.coeffs.size} weights, vector has shape {vals.shape}")
        return float(np.dot(self.coeffs, vals))

    def combine(self, a: float, other: "LinearFunctional", b: float) -> "LinearFunctional":
        """``a * self + b * other``."""
        return LinearFunctional(a * self.coeffs + b * other.coeffs, f"{a}*{self.descriptor}+{b}*{other.descriptor}")


@dataclass(frozen=True)
class FunctionalInterval:
    lower: float
    upper: float
    widening: float = 0.0
    descriptor: str = ""

    def __post_init__(self):
        if self.widening < 0:
            raise ValueError("widening must be non-negative")
        if not self.lower <= self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def default_widening(n: int, delta_n: float) -> float:
    """``log(n) / (n * delta_n)``: a unit-constant choice of the admissible widening order."""
    if n < 2 or delta_n <= 0:
        raise ValueError("need n >= 2 and a positive window length")
    return math.log(n) / (n * delta_n)


def functional_interval(
    T: LinearFunctional, ball: ConfidenceBall | DoubleSet, w_n: float = 0.0
) -> FunctionalInterval:
    """Exact range of ``T`` over the ball, widened by ``w_n`` on each side.

    For a double set the range over the union is the hull of the member ranges.
    """
    if isinstance(ball, DoubleSet):
        parts = [functional_interval(T, b, w_n) for _, b in ball.balls]
        return FunctionalInterval(
            min(p.lower for p in parts), max(p.upper for p in parts), float(w_n), T.descriptor
        )
    if T.coeffs.size != ball.n:
        raise ValueError(f"functional has {T.coeffs.size} weights but the ball lives in dimension {ball.n}")
    if w_n < 0:
        raise ValueError("widening must be non-negative")
    mid = T(ball.center)
    half = ball.radius * T.norm
    return FunctionalInterval(mid - half - w_n, mid + half + w_n, float(w_n), T.descriptor)


def _snap(x: float, n: int) -> int:
    return int(round(x * n))


def local_average(
    a: float, b: float, filt: WaveletFilter = SYMMLET8, shape: TransformShape | None = None, n: int | None = None
) -> LinearFunctional:
    """Average of the sampled curve over design points in ``(a, b]``.

    Endpoints are snapped to the nearest grid point ``i/n``; the snapped
    window differs from ``(a, b]`` by at most half a sample at each end.
    Weights on the grid are ``g_i = 1{a < i/n <= b} / (b - a)`` with ``b - a``
    the snapped length, so the functional returns a true grid average.
    """
    if not 0.0 <= a < b <= 1.0:
        raise ValueError(f"need 0 <= a < b <= 1, got ({a}, {b})")
    if shape is None:
        if n is None:
            raise ValueError("pass a TransformShape or n")
        shape = TransformShape(n)
    n = shape.n
    lo, hi = _snap(a, n), _snap(b, n)
    if hi <= lo:
        raise ValueError(f"window ({a}, {b}] holds no design point at n = {n}")
    g = np.zeros(n)
    # design point i/n (1-based) sits at position i - 1
    g[lo:hi] = n / (hi - lo)
    # sum_i g_i f(i/n) / n = c . mu with mu = dwt(f)/sqrt(n), c = dwt(g)/sqrt(n)
    c = dwt_array(g, filt, shape.coarsest_level) / math.sqrt(n)
    return LinearFunctional(c, f"avg[{lo / n:g},{hi / n:g}]")


def point_evaluator(i: int, filt: WaveletFilter = SYMMLET8, shape: TransformShape | None = None) -> LinearFunctional:
    """Value of the sampled curve at design point ``i/n`` (``i`` is 1-based)."""
    if shape is None:
        raise ValueError("pass a TransformShape")
    n = shape.n
    if not 1 <= i <= n:
        raise ValueError(f"design index {i} outside 1..{n}")
    e = np.zeros(n)
    e[i - 1] = 1.0
    # f(i/n) = sqrt(n) * (W^T mu)_i, and W^T e_i's coefficients are dwt(e_i)
    return LinearFunctional(math.sqrt(n) * dwt_array(e, filt, shape.coarsest_level), f"f({i}/{n})")


def simultaneous_intervals(
    Ts: list[LinearFunctional], ball: ConfidenceBall, w_n: float = 0.0
) -> list[FunctionalInterval]:
    """One interval per functional, all from the same ball (no multiplicity correction)."""
    if not Ts:
        raise ValueError("need at least one functional")
    return [functional_interval(T, ball, w_n) for T in Ts]
