"""Diagnostics for the pivot process ``B_n(u) = sqrt(n) (loss - SURE)`` of soft thresholding.

Notation, per coefficient ``i``::

    X_i = mu_i + (sigma / sqrt n) eps_i,   nu_i = -sqrt(n) mu_i / sigma,
    rho_n = sqrt(2 log n),   a_i = nu_i - u rho_n,   b_i = nu_i + u rho_n,

so ``|X_i| < u r_n`` exactly when ``a_i < eps_i < b_i``.  The threshold ``u``
is normalized by ``r_n = rho_n sigma / sqrt(n)``.

Nothing else in the package depends on this module.  It turns the limit
theory for ``B_n`` into quantities that can be checked numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .estimators import ThresholdSchedule
from .wavelets import TransformShape

__all__ = [
    "PivotContext",
    "gaussian_partial",
    "partial_moment",
    "z_contribution",
    "z_contribution_direct",
    "pivot_process",
    "theoretical_variance",
    "theoretical_covariance",
    "simulate_pivot",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _phi(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return np.where(np.isinf(x), 0.0, out)


def _poly_phi(poly, x):
    # poly(x) * phi(x) with the convention poly(+-inf) * phi(+-inf) = 0
    x = np.asarray(x, dtype=float)
    finite = np.isfinite(x)
    xf = np.where(finite, x, 0.0)
    return np.where(finite, poly(xf) * _phi(xf), 0.0)


def _mass(s, t):
    """``Phi(t) - Phi(s)`` computed on the side that avoids cancellation."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    upper = ndtr(-s) - ndtr(-t)  # accurate when both ends are large and positive
    lower = ndtr(t) - ndtr(s)
    return np.where(s > 0, upper, lower)


def gaussian_partial(kind: str, s, t):
    """Partial moments of the standard Normal over ``[s, t]`` (``+-inf`` allowed).

    =====  ==============================  ===========================================
    kind   integrand times phi             closed form
    =====  ==============================  ===========================================
    D1     eps                             phi(s) - phi(t)
    D2     eps^2                           s phi(s) - t phi(t) + Phi(t) - Phi(s)
    D3     eps (eps^2 - 1)                 (s^2 + 1) phi(s) - (t^2 + 1) phi(t)
    D4     (eps^2 - 1)^2                   2 (Phi(t) - Phi(s)) + s(s^2+1) phi(s) - t(t^2+1) phi(t)
    =====  ==============================  ===========================================

    ``(eps phi)' = (1 - eps^2) phi`` is what makes D2..D4 close up; D1 is just
    ``-phi`` evaluated between the limits.
    """
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(s_arr)) or np.any(np.isnan(t_arr)):
        raise ValueError("limits must not be NaN")
    if np.any(s_arr > t_arr):
        raise ValueError("lower limit exceeds upper limit")
    if kind == "D1":
        out = _phi(s_arr) - _phi(t_arr)
    elif kind == "D2":
        out = _poly_phi(lambda x: x, s_arr) - _poly_phi(lambda x: x, t_arr) + _mass(s_arr, t_arr)
    elif kind == "D3":
        out = _poly_phi(lambda x: x * x + 1.0, s_arr) - _poly_phi(lambda x: x * x + 1.0, t_arr)
    elif kind == "D4":
        cube = lambda x: x * (x * x + 1.0)  # noqa: E731
        out = 2.0 * _mass(s_arr, t_arr) + _poly_phi(cube, s_arr) - _poly_phi(cube, t_arr)
    else:
        raise ValueError(f"kind must be one of D1..D4, got {kind!r}")
    return float(out) if out.ndim == 0 else out


def partial_moment(k: int, s, t):
    """``int_s^t eps^k phi(eps) d eps`` for ``k = 0..4``, assembled from D1..D4."""
    if k == 0:
        return _mass(np.asarray(s, float), np.asarray(t, float))
    if k == 1:
        return gaussian_partial("D1", s, t)
    if k == 2:
        return gaussian_partial("D2", s, t)
    if k == 3:
        return gaussian_partial("D3", s, t) + gaussian_partial("D1", s, t)
    if k == 4:
        return gaussian_partial("D4", s, t) + 2.0 * gaussian_partial("D2", s, t) - _mass(
            np.asarray(s, float), np.asarray(t, float)
        )
    raise ValueError("moment order must be in 0..4")


@dataclass(frozen=True)
class PivotContext:
    n: int
    sigma: float
    nu: np.ndarray

    @classmethod
    def from_mu(cls, mu, sigma: float) -> "PivotContext":
        mu = np.asarray(mu, dtype=float)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(mu.size, float(sigma), -math.sqrt(mu.size) * mu / sigma)

    @property
    def rho_n(self) -> float:
        return math.sqrt(2.0 * math.log(self.n))

    def a(self, u: float) -> np.ndarray:
        return self.nu - u * self.rho_n

    def b(self, u: float) -> np.ndarray:
        return self.nu + u * self.rho_n


def z_contribution(eps, nu, u, rho_n: float, sigma: float, n: int):
    """Per-coefficient pivot term in indicator form.

    ``(sigma^2/sqrt n) [(eps^2-1)(1-2I) + 2 nu eps I - 2 u rho_n eps (I+ - I-)]``
    with ``I = 1{a < eps < b}``, ``I+ = 1{eps > b}``, ``I- = 1{eps < a}``.
    """
    eps = np.asarray(eps, dtype=float)
    nu = np.asarray(nu, dtype=float)
    a = nu - u * rho_n
    b = nu + u * rho_n
    inside = ((a < eps) & (eps < b)).astype(float)
    sign = (eps > b).astype(float) - (eps < a).astype(float)
    out = sigma**2 / math.sqrt(n) * (
        (eps**2 - 1.0) * (1.0 - 2.0 * inside) + 2.0 * nu * eps * inside - 2.0 * u * rho_n * eps * sign
    )
    return float(out) if out.ndim == 0 else out


def z_contribution_direct(eps, nu, u, rho_n: float, sigma: float, n: int):
    """Same term computed as ``sqrt(n) * (squared error - SURE term)`` of one coefficient.

    The inside test is strict, matching the indicator form.  At ``|X| = t``
    exactly the two SURE conventions differ by ``2 sigma_n^2``, a null event.
    """
    eps = np.asarray(eps, dtype=float)
    nu = np.asarray(nu, dtype=float)
    sn = sigma / math.sqrt(n)
    mu = -nu * sn
    x = mu + sn * eps
    t = u * rho_n * sn
    est = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    inside = (np.abs(x) < t).astype(float)
    sure = sn**2 - 2.0 * sn**2 * inside + np.minimum(x * x, t * t)
    out = math.sqrt(n) * ((est - mu) ** 2 - sure)
    return float(out) if out.ndim == 0 else out


def _per_coefficient_u(schedule, shape: TransformShape) -> np.ndarray:
    # scaling coefficients are never thresholded: u = 0 there
    u = np.zeros(shape.n)
    if isinstance(schedule, ThresholdSchedule):
        for j, uj in zip(schedule.levels, schedule.u):
            u[shape.level_slice(j)] = uj
    else:
        u[shape.n_scaling :] = float(schedule)
    return u


def pivot_process(eps, mu, u, sigma: float, shape: TransformShape | None = None, check: bool = True) -> float:
    """``B_n(u)`` for one noise realization.

    ``u`` is a :class:`ThresholdSchedule` or a single normalized threshold
    applied to every detail level.  The value is computed both as
    ``sqrt(n) (L - S)`` and as the sum of per-coefficient contributions, and
    the two are required to agree to 1e-8.
    """
    eps = np.asarray(eps, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if eps.shape != mu.shape or eps.ndim != 1:
        raise ValueError(f"noise shape {eps.shape} does not match coefficient shape {mu.shape}")
    n = mu.size
    if shape is None:
        shape = TransformShape(n)
    if shape.n != n:
        raise ValueError("shape does not match the coefficient count")
    if sigma == 0.0:
        return 0.0
    uu = _per_coefficient_u(u, shape)
    rho_n = math.sqrt(2.0 * math.log(n))
    sn = sigma / math.sqrt(n)
    x = mu + sn * eps
    t = uu * rho_n * sn
    est = np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
    loss = math.fsum((est - mu) ** 2)
    inside = np.abs(x) < t
    sure = math.fsum(sn**2 - 2.0 * sn**2 * inside + np.minimum(x * x, t * t))
    b_loss = math.sqrt(n) * (loss - sure)
    nu = -mu / sn
    b_sum = math.fsum(z_contribution(eps, nu, uu, rho_n, sigma, n))
    if check and abs(b_loss - b_sum) > 1e-8 * max(1.0, abs(b_loss)):
        raise ArithmeticError(f"pivot forms disagree: {b_loss!r} vs {b_sum!r}")
    return b_sum


def theoretical_variance(mu, u, sigma: float, n: int | None = None) -> float:
    """``sum_i E Z_i(u)^2`` in closed form; ``u`` is a scalar or one value per coefficient.

    Each coefficient contributes
    ``(2 sigma^4 / n) [1 + 2 u^2 rho^2 (1 - P) + 2 nu^2 P + 2 a phi(b) - 2 b phi(a)]``
    where ``P = Phi(b) - Phi(a)``.  This is the familiar
    ``1 + 2u^2 rho^2 + 2ab P + ...`` rewritten to avoid cancelling
    ``2 u^2 rho^2`` against ``2ab P``.
    """
    mu = np.asarray(mu, dtype=float)
    if n is None:
        n = mu.size
    if np.ndim(u) == 0:
        if not 0.0 < u <= 1.0:
            raise ValueError(f"u must lie in (0, 1], got {u}")
    else:
        # per-coefficient thresholds; 0 marks an unthresholded coefficient
        u = np.asarray(u, dtype=float)
        if u.shape != mu.shape or np.any((u < 0.0) | (u > 1.0)):
            raise ValueError("per-coefficient u must match mu and lie in [0, 1]")
    ctx = PivotContext(n, float(sigma), -math.sqrt(n) * mu / sigma)
    a, b = ctx.a(u), ctx.b(u)
    p = _mass(a, b)
    ur2 = (u * ctx.rho_n) ** 2
    terms = 1.0 + 2.0 * ur2 * (1.0 - p) + 2.0 * ctx.nu**2 * p + 2.0 * a * _phi(b) - 2.0 * b * _phi(a)
    return 2.0 * sigma**4 / n * math.fsum(terms)


def _poly_mul(p, q):
    return np.polynomial.polynomial.polymul(p, q)


def _expect_poly(poly, s, t):
    # E[poly(eps) 1{s < eps < t}] for poly of degree <= 4 (coefficients low to high)
    return sum(c * partial_moment(k, s, t) for k, c in enumerate(poly))


def _g_pieces(nu: float, w: float):
    """``g(eps) = sqrt(n)/sigma^2 * Z`` as polynomials on (-inf, a), (a, b), (b, inf) for threshold ``w = u rho``."""
    outside_lo = np.array([-1.0, 2.0 * w, 1.0])  # (eps^2 - 1) + 2 w eps
    inside = np.array([1.0, 2.0 * nu, -1.0])  # -(eps^2 - 1) + 2 nu eps
    outside_hi = np.array([-1.0, -2.0 * w, 1.0])  # (eps^2 - 1) - 2 w eps
    return outside_lo, inside, outside_hi


def _cov_one(nu: float, wu: float, wv: float) -> float:
    """``E[g_u g_v]`` for one coefficient with ``wu <= wv``."""
    lo_u, in_u, hi_u = _g_pieces(nu, wu)
    lo_v, in_v, hi_v = _g_pieces(nu, wv)
    av, au, bu, bv = nu - wv, nu - wu, nu + wu, nu + wv
    inf = math.inf
    return float(
        _expect_poly(_poly_mul(lo_u, lo_v), -inf, av)
        + _expect_poly(_poly_mul(lo_u, in_v), av, au)
        + _expect_poly(_poly_mul(in_u, in_v), au, bu)
        + _expect_poly(_poly_mul(hi_u, in_v), bu, bv)
        + _expect_poly(_poly_mul(hi_u, hi_v), bv, inf)
    )


def theoretical_covariance(mu, u: float, v: float, sigma: float, n: int | None = None) -> float:
    """``sum_i E[Z_i(u) Z_i(v)]`` for ``0 <= u < v <= 1``.

    The product of the two contributions is a polynomial in ``eps`` on each
    of the five intervals cut by ``a(v) < a(u) < b(u) < b(v)``, so its mean is
    a combination of Gaussian partial moments.  This is evaluated directly
    rather than through a hand-expanded display, and is validated against
    Monte Carlo and against :func:`theoretical_variance` as ``u -> v``.
    """
    if not 0.0 <= u < v <= 1.0:
        raise ValueError(f"need 0 <= u < v <= 1, got u={u}, v={v}")
    mu = np.asarray(mu, dtype=float)
    if n is None:
        n = mu.size
    ctx = PivotContext(n, float(sigma), -math.sqrt(n) * mu / sigma)
    wu, wv = u * ctx.rho_n, v * ctx.rho_n
    # the moments only depend on nu, so evaluate each distinct value once
    vals, counts = np.unique(ctx.nu, return_counts=True)
    total = math.fsum(c * _cov_one(float(nu), wu, wv) for nu, c in zip(vals, counts))
    return sigma**4 / n * total


def simulate_pivot(
    mu, u, sigma: float, reps: int, seed: int, shape: TransformShape | None = None
) -> np.ndarray:
    """``B_n(u)`` over ``reps`` noise draws; draw ``r`` uses stream ``(seed, r)``."""
    from .signals import replication_rng

    mu = np.asarray(mu, dtype=float)
    if shape is None:
        shape = TransformShape(mu.size)
    uu = _per_coefficient_u(u, shape)
    n = mu.size
    rho_n = math.sqrt(2.0 * math.log(n))
    nu = -math.sqrt(n) * mu / sigma
    out = np.empty(reps)
    for r in range(reps):
        eps = replication_rng(seed, r).standard_normal(n)
        out[r] = math.fsum(z_contribution(eps, nu, uu, rho_n, sigma, n))
    return out
