"""Periodized orthonormal discrete wavelet transform on [0, 1].

Coefficients are stored flat, coarse to fine::

    (alpha_0 .. alpha_{2^J0 - 1}, beta_{J0,0} .., beta_{J0+1,0} .., ..., beta_{J1-1, .})

so that ``beta_{j,k}`` sits at 1-based flat index ``2**j + k + 1`` and
``alpha_k`` at ``k + 1``.  The transform matrix is orthogonal, so the
Euclidean norm of the coefficients equals the norm of the samples.

All array routines act on the last axis, which lets the Monte Carlo harness
transform a whole batch of replications at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

__all__ = [
    "WaveletFilter",
    "TransformShape",
    "CoefficientVector",
    "HAAR",
    "SYMMLET8",
    "get_filter",
    "dwt_forward",
    "dwt_inverse",
    "dwt_array",
    "idwt_array",
    "index_to_level",
    "level_to_index",
]


@dataclass(frozen=True)
class WaveletFilter:
    """Orthonormal lowpass filter; the highpass partner is derived by the QMF rule."""

    name: str
    lowpass: tuple[float, ...]

    def __post_init__(self):
        h = np.asarray(self.lowpass, dtype=float)
        if h.ndim != 1 or h.size < 2 or h.size % 2:
            raise ValueError(f"filter {self.name!r} needs an even number (>= 2) of taps")
        if abs(h.sum() - math.sqrt(2.0)) > 1e-12 or abs((h**2).sum() - 1.0) > 1e-12:
            raise ValueError(f"filter {self.name!r} is not normalized (sum h = sqrt 2, sum h^2 = 1)")

    @property
    def length(self) -> int:
        return len(self.lowpass)

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.lowpass, dtype=float)

    @property
    def g(self) -> np.ndarray:
        # g[m] = (-1)^m h[L-1-m]
        h = self.h
        return h[::-1] * (-1.0) ** np.arange(h.size)


HAAR = WaveletFilter("haar", (1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0)))

# Least-asymmetric Daubechies filter with 8 vanishing moments (16 taps).
SYMMLET8 = WaveletFilter(
    "s8",
    (
        0.0018899503327680003,
        -0.00030292051472308697,
        -0.014952258337062054,
        0.0038087520138924460,
        0.049137179673731427,
        -0.027219029917099598,
        -0.051945838107892168,
        0.36444189483615559,
        0.77718575169962468,
        0.48135965125907686,
        -0.061273359067794014,
        -0.14329423835127550,
        0.0076074873249709929,
        0.031695087811526409,
        -0.00054213233179830900,
        -0.0033824159510066234,
    ),
)

_FILTERS = {"haar": HAAR, "s8": SYMMLET8, "sym8": SYMMLET8, "symmlet8": SYMMLET8}


def get_filter(name: str) -> WaveletFilter:
    try:
        return _FILTERS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown wavelet filter {name!r}; choose from {sorted(_FILTERS)}") from None


def _log2_exact(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise ValueError(f"sample count must be a power of two >= 2, got {n}")
    return n.bit_length() - 1


@dataclass(frozen=True)
class TransformShape:
    """Sample count ``n = 2**J1`` and the coarsest level ``J0`` kept as scaling block."""

    n: int
    coarsest_level: int = 4

    def __post_init__(self):
        j1 = _log2_exact(self.n)
        if not 0 <= self.coarsest_level < j1:
            raise ValueError(
                f"coarsest level must satisfy 0 <= J0 < J1 = {j1}, got {self.coarsest_level}"
            )

    @property
    def finest_level(self) -> int:
        return _log2_exact(self.n)

    @property
    def levels(self) -> range:
        """Detail levels J0 .. J1-1."""
        return range(self.coarsest_level, self.finest_level)

    @property
    def n_scaling(self) -> int:
        return 2**self.coarsest_level

    def scaling_slice(self) -> slice:
        return slice(0, self.n_scaling)

    def level_slice(self, j: int) -> slice:
        if j not in self.levels:
            raise ValueError(f"level {j} outside detail range {self.levels}")
        return slice(2**j, 2 ** (j + 1))

    def blocks(self) -> Iterator[slice]:
        """Scaling block first, then each detail level, coarse to fine."""
        yield self.scaling_slice()
        for j in self.levels:
            yield self.level_slice(j)

    def level_of_index(self) -> np.ndarray:
        """Per-coefficient level label (0-based positions); scaling block gets ``-1``."""
        out = np.full(self.n, -1, dtype=int)
        for j in self.levels:
            out[self.level_slice(j)] = j
        return out


@dataclass(frozen=True)
class CoefficientVector:
    values: np.ndarray
    shape: TransformShape
    filter_name: str = field(default="s8", compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.shape.n,):
            raise ValueError(f"expected {self.shape.n} coefficients, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.shape.n

    @property
    def scaling(self) -> np.ndarray:
        return self.values[self.shape.scaling_slice()]

    def level(self, j: int) -> np.ndarray:
        return self.values[self.shape.level_slice(j)]

    @property
    def details(self) -> np.ndarray:
        return self.values[self.shape.n_scaling :]

    def replace(self, values: np.ndarray) -> "CoefficientVector":
        return CoefficientVector(values, self.shape, self.filter_name)

    def __len__(self) -> int:
        return self.shape.n


def _analysis_step(x: np.ndarray, h: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = x.shape[-1]
    idx = (2 * np.arange(m // 2)[:, None] + np.arange(h.size)[None, :]) % m
    windows = x[..., idx]
    return windows @ h, windows @ g


def _synthesis_step(a: np.ndarray, d: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    half = a.shape[-1]
    m = 2 * half
    out = np.zeros(a.shape[:-1] + (m,))
    k2 = 2 * np.arange(half)
    # For small m the taps wrap more than once, so accumulate per tap.
    for tap in range(h.size):
        pos = (k2 + tap) % m
        out[..., pos] += a * h[tap] + d * g[tap]
    return out


def dwt_array(x: np.ndarray, filt: WaveletFilter, coarsest_level: int) -> np.ndarray:
    """Forward transform along the last axis; returns flat coefficient arrays."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    j1 = _log2_exact(n)
    if not 0 <= coarsest_level < j1:
        raise ValueError(f"coarsest level must satisfy 0 <= J0 < J1 = {j1}, got {coarsest_level}")
    h, g = filt.h, filt.g
    out = np.empty_like(x)
    approx = x
    for j in range(j1 - 1, coarsest_level - 1, -1):
        approx, detail = _analysis_step(approx, h, g)
        out[..., 2**j : 2 ** (j + 1)] = detail
    out[..., : 2**coarsest_level] = approx
    return out


def idwt_array(c: np.ndarray, filt: WaveletFilter, coarsest_level: int) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    n = c.shape[-1]
    j1 = _log2_exact(n)
    if not 0 <= coarsest_level < j1:
        raise ValueError(f"coarsest level must satisfy 0 <= J0 < J1 = {j1}, got {coarsest_level}")
    h, g = filt.h, filt.g
    approx = c[..., : 2**coarsest_level]
    for j in range(coarsest_level, j1):
        approx = _synthesis_step(approx, c[..., 2**j : 2 ** (j + 1)], h, g)
    return approx


def dwt_forward(
    samples: np.ndarray, filt: WaveletFilter = SYMMLET8, shape: TransformShape | None = None
) -> CoefficientVector:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1:
        raise ValueError("dwt_forward takes a 1-D sample array; use dwt_array for batches")
    if shape is None:
        shape = TransformShape(samples.size)
    if shape.n != samples.size:
        raise ValueError(f"shape expects n = {shape.n}, got {samples.size} samples")
    return CoefficientVector(dwt_array(samples, filt, shape.coarsest_level), shape, filt.name)


def dwt_inverse(coeffs: CoefficientVector, filt: WaveletFilter = SYMMLET8) -> np.ndarray:
    if coeffs.filter_name != filt.name:
        raise ValueError(
            f"coefficients were produced with filter {coeffs.filter_name!r}, not {filt.name!r}"
        )
    return idwt_array(coeffs.values, filt, coeffs.shape.coarsest_level)


def index_to_level(ell: int, shape: TransformShape) -> tuple[str, int, int]:
    """Map a 1-based flat index to ``(kind, j, k)``; ``j`` is J0 for scaling entries."""
    if not 1 <= ell <= shape.n:
        raise ValueError(f"flat index {ell} outside 1..{shape.n}")
    pos = ell - 1
    if pos < shape.n_scaling:
        return "scaling", shape.coarsest_level, pos
    j = pos.bit_length() - 1
    return "detail", j, pos - 2**j


def level_to_index(kind: str, j: int, k: int, shape: TransformShape) -> int:
    if kind == "scaling":
        if not 0 <= k < shape.n_scaling:
            raise ValueError(f"scaling position {k} outside 0..{shape.n_scaling - 1}")
        return k + 1
    if kind != "detail":
        raise ValueError(f"kind must be 'scaling' or 'detail', got {kind!r}")
    if j not in shape.levels or not 0 <= k < 2**j:
        raise ValueError(f"(j={j}, k={k}) is not a detail coefficient for {shape}")
    return 2**j + k + 1
