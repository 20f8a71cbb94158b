"""Soft-threshold and monotone-modulation estimators tuned by Stein's unbiased risk.

Coefficients follow the sequence model ``X = mu + (sigma / sqrt(n)) Z``; the
per-coefficient noise variance ``sigma**2 / n`` is written ``sigma_n2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .wavelets import CoefficientVector, WaveletFilter, idwt_array

__all__ = [
    "DEFAULT_RHO",
    "ThresholdSchedule",
    "ModulationPlan",
    "soft_threshold",
    "universal_threshold",
    "universal_schedule",
    "sure_risk",
    "total_sure",
    "minimize_sure",
    "level_stats",
    "pava_decreasing",
    "monotone_modulator",
    "modulator_sure",
    "apply_shrinkage",
    "estimate_curve",
]

DEFAULT_RHO = 0.72


def soft_threshold(x, t):
    """``sgn(x) * (|x| - t)_+``; works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be non-negative")
    out = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _rho_n(n: int) -> float:
    return math.sqrt(2.0 * math.log(n))


def universal_threshold(n: int, sigma: float) -> float:
    """``sqrt(2 log n) * sigma / sqrt(n)`` in coefficient units."""
    if n < 2:
        raise ValueError("universal threshold needs n >= 2")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return _rho_n(n) * sigma / math.sqrt(n)


@dataclass(frozen=True)
class ThresholdSchedule:
    """Thresholds ``t_j`` per detail level, in coefficient units.

    The normalized form is ``u_j = t_j / r_n`` with ``r_n = sqrt(2 log n) sigma / sqrt(n)``.
    Thresholds are stored exactly because SURE jumps at every ``|x_i|``; recomputing
    ``u * r_n`` can land one ulp off a knot.
    """

    mode: str
    t: tuple[float, ...]
    levels: tuple[int, ...]
    n: int
    sigma: float
    floor: float = DEFAULT_RHO

    def __post_init__(self):
        if self.mode not in ("global", "levelwise", "universal", "fixed"):
            raise ValueError(f"unknown threshold mode {self.mode!r}")
        if len(self.t) != len(self.levels):
            raise ValueError("need one threshold per detail level")
        if any(v < 0.0 for v in self.t):
            raise ValueError("thresholds must be non-negative")

    @property
    def rho_n(self) -> float:
        return _rho_n(self.n)

    @property
    def r_n(self) -> float:
        return self.rho_n * self.sigma / math.sqrt(self.n)

    @property
    def u(self) -> tuple[float, ...]:
        if self.r_n == 0.0:
            return (1.0,) * len(self.t)
        return tuple(v / self.r_n for v in self.t)

    @property
    def thresholds(self) -> dict[int, float]:
        return dict(zip(self.levels, self.t))


@dataclass(frozen=True)
class ModulationPlan:
    """Blockwise multipliers: ``xi_phi`` on the scaling block, ``xi[j]`` on level j."""

    xi_phi: float
    xi: tuple[float, ...]
    levels: tuple[int, ...]

    def __post_init__(self):
        if len(self.xi) != len(self.levels):
            raise ValueError("need one modulator per detail level")
        chain = (1.0, self.xi_phi) + tuple(self.xi)
        if any(v < 0.0 for v in chain) or any(a < b for a, b in zip(chain, chain[1:])):
            raise ValueError(f"modulators must satisfy 1 >= xi_phi >= xi_J0 >= ... >= 0, got {chain[1:]}")

    def per_coefficient(self, shape) -> np.ndarray:
        out = np.empty(shape.n)
        out[shape.scaling_slice()] = self.xi_phi
        for j, v in zip(self.levels, self.xi):
            out[shape.level_slice(j)] = v
        return out


Plan = Union[ThresholdSchedule, ModulationPlan]


def sure_risk(x, t: float, sigma_n2: float) -> float:
    """Stein's unbiased risk for soft thresholding a slice ``x`` at ``t``."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    x2 = np.square(np.asarray(x, dtype=float))
    inside = x2 <= t * t
    return float(np.sum(sigma_n2 - 2.0 * sigma_n2 * inside + np.minimum(x2, t * t)))


def _sure_at_candidates(absx_sorted: np.ndarray, cumsq: np.ndarray, cands: np.ndarray, sigma_n2: float):
    # counts of |x| <= t, energy of those, and t^2 times the rest
    m = absx_sorted.size
    k = np.searchsorted(absx_sorted, cands, side="right")
    below = np.concatenate(([0.0], cumsq))[k]
    return m * sigma_n2 - 2.0 * sigma_n2 * k + below + cands**2 * (m - k)


def _minimize_restricted(x: np.ndarray, lo: float, hi: float, sigma_n2: float) -> tuple[float, float]:
    """Exact minimizer of SURE over ``t in [lo, hi]``; ties go to the larger ``t``.

    Between consecutive ``|x_i|`` the objective is increasing in ``t`` and it
    drops at each ``|x_i|``, so the minimum sits at ``lo`` or at a knot.
    """
    a = np.sort(np.abs(np.asarray(x, dtype=float)))
    cumsq = np.cumsum(a**2)
    knots = a[(a >= lo) & (a <= hi)]
    cands = np.unique(np.concatenate(([lo, hi], knots)))
    vals = _sure_at_candidates(a, cumsq, cands, sigma_n2)
    best = np.flatnonzero(vals == vals.min())[-1]
    return float(cands[best]), float(vals[best])


def minimize_sure(
    coeffs: CoefficientVector, mode: str, sigma: float, rho: float = DEFAULT_RHO
) -> ThresholdSchedule:
    """SureShrink restricted to thresholds in ``[rho * r_n, r_n]``.

    ``mode`` is ``"global"`` (one threshold for every detail level) or
    ``"levelwise"`` (one per level, each minimized separately).
    """
    if not 1.0 / math.sqrt(2.0) < rho <= 1.0:
        raise ValueError(f"threshold floor must lie in (1/sqrt(2), 1], got {rho}")
    shape = coeffs.shape
    levels = tuple(shape.levels)
    n = shape.n
    sigma_n2 = sigma**2 / n
    r_n = _rho_n(n) * sigma / math.sqrt(n)
    lo, hi = rho * r_n, r_n
    if mode == "global":
        t, _ = _minimize_restricted(coeffs.details, lo, hi, sigma_n2)
        return ThresholdSchedule(mode, (t,) * len(levels), levels, n, sigma, rho)
    if mode == "levelwise":
        ts = []
        for j in levels:
            beta = coeffs.level(j)
            if beta.size == 0:
                raise ValueError(f"level {j} is empty")
            ts.append(_minimize_restricted(beta, lo, hi, sigma_n2)[0])
        return ThresholdSchedule(mode, tuple(ts), levels, n, sigma, rho)
    raise ValueError(f"mode must be 'global' or 'levelwise', got {mode!r}")


def universal_schedule(coeffs: CoefficientVector, sigma: float) -> ThresholdSchedule:
    levels = tuple(coeffs.shape.levels)
    t = universal_threshold(coeffs.n, sigma)
    return ThresholdSchedule("universal", (t,) * len(levels), levels, coeffs.n, sigma, 1.0)


def level_stats(block, sigma_n2: float) -> tuple[float, float, float]:
    """``(A, w, xi_star)`` for one block: excess energy, total energy, unconstrained minimizer.

    The block's SURE term is ``w * (xi - A / w)**2 + const``.
    """
    b2 = np.square(np.asarray(block, dtype=float))
    if b2.size == 0:
        raise ValueError("empty block")
    w = float(b2.sum())
    a = w - b2.size * sigma_n2
    if w == 0.0:
        return a, 0.0, 0.0
    return a, w, min(max(a / w, 0.0), 1.0)


def pava_decreasing(y, w) -> np.ndarray:
    """Weighted least-squares fit of a nonincreasing sequence (pool adjacent violators).

    Zero-weight entries do not influence the fit; they copy the value of the
    nearest positively weighted entry before them (or after, at the start).
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    pos = np.flatnonzero(w > 0)
    out = np.zeros_like(y)
    if pos.size == 0:
        return out
    # stack of pooled blocks: (weighted mean, weight, count)
    means: list[float] = []
    weights: list[float] = []
    counts: list[int] = []
    for i in pos:
        m, wt, c = y[i], w[i], 1
        while means and means[-1] < m:
            pm, pw, pc = means.pop(), weights.pop(), counts.pop()
            m = (pm * pw + m * wt) / (pw + wt)
            wt += pw
            c += pc
        means.append(m)
        weights.append(wt)
        counts.append(c)
    fitted = np.repeat(means, counts)
    out[pos] = fitted
    # fill zero-weight slots from the left neighbour so the chain stays monotone
    last = fitted[0]
    k = 0
    for i in range(y.size):
        if k < pos.size and i == pos[k]:
            last = fitted[k]
            k += 1
        else:
            out[i] = last
    return out


def _block_stats(coeffs: CoefficientVector, sigma_n2: float):
    a, w = [], []
    for sl in coeffs.shape.blocks():
        ab, wb, _ = level_stats(coeffs.values[sl], sigma_n2)
        a.append(ab)
        w.append(wb)
    return np.array(a), np.array(w)


def monotone_modulator(coeffs: CoefficientVector, sigma: float) -> ModulationPlan:
    """Minimize the modulator SURE over ``1 >= xi_phi >= xi_J0 >= ... >= xi_{J1-1} >= 0``."""
    sigma_n2 = sigma**2 / coeffs.n
    a, w = _block_stats(coeffs, sigma_n2)
    target = np.divide(a, w, out=np.zeros_like(a), where=w > 0)
    xi = np.clip(pava_decreasing(target, w), 0.0, 1.0)
    return ModulationPlan(float(xi[0]), tuple(float(v) for v in xi[1:]), tuple(coeffs.shape.levels))


def modulator_sure(coeffs: CoefficientVector, plan: ModulationPlan, sigma: float) -> float:
    """``sum_l [xi_l^2 sigma^2/n + (1 - xi_l)^2 (x_l^2 - sigma^2/n)]``."""
    sigma_n2 = sigma**2 / coeffs.n
    xi = plan.per_coefficient(coeffs.shape)
    x2 = coeffs.values**2
    return float(np.sum(xi**2 * sigma_n2 + (1.0 - xi) ** 2 * (x2 - sigma_n2)))


def total_sure(coeffs: CoefficientVector, plan: Plan) -> float:
    """SURE of the whole fit, scaling block included."""
    if isinstance(plan, ModulationPlan):
        raise TypeError("use modulator_sure for modulation plans")
    sigma_n2 = plan.sigma**2 / coeffs.n
    total = coeffs.shape.n_scaling * sigma_n2
    for j, t in plan.thresholds.items():
        total += sure_risk(coeffs.level(j), t, sigma_n2)
    return total


def apply_shrinkage(coeffs: CoefficientVector, plan: Plan) -> CoefficientVector:
    shape = coeffs.shape
    if isinstance(plan, ModulationPlan):
        if plan.levels != tuple(shape.levels):
            raise ValueError("modulation plan levels do not match the coefficient shape")
        return coeffs.replace(coeffs.values * plan.per_coefficient(shape))
    if plan.levels != tuple(shape.levels) or plan.n != shape.n:
        raise ValueError("threshold schedule does not match the coefficient shape")
    out = coeffs.values.copy()
    for j, t in plan.thresholds.items():
        sl = shape.level_slice(j)
        out[sl] = soft_threshold(out[sl], t)
    return coeffs.replace(out)


def estimate_curve(coeffs_hat: CoefficientVector, filt: WaveletFilter) -> np.ndarray:
    """Fitted curve on the design grid: ``sqrt(n) * idwt(coefficients)``."""
    return math.sqrt(coeffs_hat.n) * idwt_array(coeffs_hat.values, filt, coeffs_hat.shape.coarsest_level)
