"""Test curves, noisy samples on the grid x_i = i/n, and empirical coefficients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .wavelets import SYMMLET8, CoefficientVector, TransformShape, WaveletFilter, dwt_array

__all__ = [
    "TEST_FUNCTIONS",
    "RegressionSample",
    "BesovParams",
    "eval_test_function",
    "design_points",
    "replication_rng",
    "generate_sample",
    "empirical_coefficients",
    "true_coefficients",
    "besov_seminorm",
]


def _f0(x):
    return np.zeros_like(x)


def _f1(x):
    return 2.0 * 6.75**3 * x**6 * (1.0 - x) ** 3


def _f2(x):
    return np.select(
        [x < 0.3, x < 0.6, x < 0.8],
        [1.5, 0.5, 2.0],
        default=0.0,
    )


TEST_FUNCTIONS = {"f0": _f0, "f1": _f1, "f2": _f2}


def eval_test_function(fid: str, x):
    """Evaluate test curve ``fid`` (``"f0"``, ``"f1"`` or ``"f2"``) at points in [0, 1]."""
    try:
        f = TEST_FUNCTIONS[fid]
    except KeyError:
        raise ValueError(f"unknown test function {fid!r}; expected one of {sorted(TEST_FUNCTIONS)}") from None
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise ValueError("test functions are defined on [0, 1] only")
    out = f(arr)
    return float(out) if out.ndim == 0 else out


def design_points(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / n


def replication_rng(seed: int, replication: int = 0) -> np.random.Generator:
    """PCG64 stream keyed by ``(seed, replication)`` through ``SeedSequence``.

    Each replication owns an independent stream, so results do not depend on
    the order in which replications are run.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replication])))


@dataclass(frozen=True)
class RegressionSample:
    y: np.ndarray
    sigma: float
    seed: int | None = None
    function: str | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        n = y.size
        if y.ndim != 1 or n < 2 or n & (n - 1):
            raise ValueError(f"sample length must be a power of two >= 2, got {y.shape}")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def x(self) -> np.ndarray:
        return design_points(self.n)


def generate_sample(
    fid: str, n: int, sigma: float, seed: int, replication: int = 0
) -> RegressionSample:
    """Draw ``Y_i = f(i/n) + sigma * eps_i`` with standard Normal ``eps``."""
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two >= 2, got {n}")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    signal = eval_test_function(fid, design_points(n))
    eps = replication_rng(seed, replication).standard_normal(n)
    return RegressionSample(signal + sigma * eps, float(sigma), seed, fid)


def empirical_coefficients(
    sample: RegressionSample | np.ndarray,
    filt: WaveletFilter = SYMMLET8,
    shape: TransformShape | None = None,
) -> CoefficientVector:
    """Coefficients ``dwt(y) / sqrt(n)``: mean is the curve's coefficient, variance sigma^2/n."""
    y = sample.y if isinstance(sample, RegressionSample) else np.asarray(sample, dtype=float)
    if shape is None:
        shape = TransformShape(y.size)
    if y.shape != (shape.n,):
        raise ValueError(f"sample length {y.size} does not match transform size {shape.n}")
    vals = dwt_array(y, filt, shape.coarsest_level) / np.sqrt(shape.n)
    return CoefficientVector(vals, shape, filt.name)


def true_coefficients(fid: str, shape: TransformShape, filt: WaveletFilter = SYMMLET8) -> CoefficientVector:
    """Noiseless coefficient vector of a test curve; the coverage target."""
    signal = eval_test_function(fid, design_points(shape.n))
    return empirical_coefficients(signal, filt, shape)


@dataclass(frozen=True)
class BesovParams:
    p: float
    q: float
    smoothness: float
    radius: float = 1.0

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("Besov indices need p >= 1 and q >= 1")
        if self.radius <= 0:
            raise ValueError("Besov radius must be positive")

    @property
    def gamma(self) -> float:
        if self.p >= 2:
            return self.smoothness
        return self.smoothness + 0.5 - 1.0 / self.p


def besov_seminorm(coeffs: CoefficientVector, params: BesovParams) -> float:
    """Weighted l_p / l_q norm of the detail levels present in ``coeffs``."""
    p, q, s = params.p, params.q, params.smoothness
    terms = []
    for j in coeffs.shape.levels:
        beta = np.abs(coeffs.level(j))
        lp = np.max(beta) if np.isinf(p) else np.sum(beta**p) ** (1.0 / p)
        terms.append(2.0 ** (j * (s + 0.5 - 1.0 / p)) * lp)
    terms = np.asarray(terms)
    if np.isinf(q):
        return float(terms.max(initial=0.0))
    return float(np.sum(terms**q) ** (1.0 / q))
