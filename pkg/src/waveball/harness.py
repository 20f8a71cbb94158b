"""Monte Carlo coverage experiments and the end-to-end fitting pipeline.

Replication ``r`` of an experiment draws its noise from the stream keyed by
``(seed, r)``, so a report depends only on the configuration and not on how
replications are scheduled.  Aggregates are formed in replication order with
exactly rounded sums, which makes serial and parallel runs byte-identical.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import chi2

from .confidence import (
    DEFAULT_TAU_FORM,
    METHODS,
    SIGMA_MODES,
    TAU_FORMS,
    ConfidenceBall,
    DoubleSet,
    ball_contains,
    dilate_for_function_space,
    double_set,
    known_sigma_ball,
    plugin_ball,
)
from .estimators import DEFAULT_RHO, estimate_curve
from .signals import TEST_FUNCTIONS, empirical_coefficients, generate_sample, true_coefficients
from .variance import z_upper
from .wavelets import CoefficientVector, TransformShape, get_filter

__all__ = [
    "PRESETS",
    "WORKERS_ENV",
    "ExperimentConfig",
    "CoverageReport",
    "FitResult",
    "NumericalFailure",
    "build_region",
    "run_coverage",
    "run_table",
    "format_table",
    "table_csv",
    "chisq_baseline_radius",
    "fit_curve",
    "mc_halfwidth",
]

log = logging.getLogger(__name__)

PRESETS = {"ci": 1000, "full": 5000}
WORKERS_ENV = "WAVEBALL_WORKERS"

PUBLISHED_KNOWN_SIGMA = {
    # (method, function): (coverage, average radius), sigma known
    ("universal", "f0"): (0.951, 0.274),
    ("universal", "f1"): (0.949, 0.299),
    ("universal", "f2"): (0.935, 0.439),
    ("sure-global", "f0"): (0.946, 0.270),
    ("sure-global", "f1"): (0.941, 0.292),
    ("sure-global", "f2"): (0.937, 0.401),
    ("sure-level", "f0"): (0.944, 0.268),
    ("sure-level", "f1"): (0.940, 0.289),
    ("sure-level", "f2"): (0.927, 0.395),
    ("modulator", "f0"): (0.941, 0.258),
    ("modulator", "f1"): (0.940, 0.269),
    ("modulator", "f2"): (0.933, 0.329),
}

PUBLISHED_PLUGIN = {
    # coverage with the plug-in sigma estimate
    ("universal", "f0"): 0.961,
    ("universal", "f1"): 0.963,
    ("universal", "f2"): 0.938,
    ("sure-global", "f0"): 0.955,
    ("sure-global", "f1"): 0.955,
    ("sure-global", "f2"): 0.940,
    ("sure-level", "f0"): 0.954,
    ("sure-level", "f1"): 0.953,
    ("sure-level", "f2"): 0.929,
    ("modulator", "f0"): 0.955,
    ("modulator", "f1"): 0.961,
    ("modulator", "f2"): 0.951,
}


class NumericalFailure(ArithmeticError):
    """A replication produced a non-finite radius or center."""


@dataclass(frozen=True)
class ExperimentConfig:
    function: str = "f1"
    n: int = 1024
    sigma: float = 1.0
    alpha: float = 0.05
    method: str = "sure-level"
    sigma_mode: str = "known"
    replications: int = PRESETS["ci"]
    seed: int = 0
    J0: int = 4
    filter: str = "s8"
    rho: float = DEFAULT_RHO
    delta: float = 0.0
    grid_size: int = 21
    tau_form: str = DEFAULT_TAU_FORM

    def __post_init__(self):
        if self.function not in TEST_FUNCTIONS:
            raise ValueError(f"unknown function {self.function!r}; expected one of {sorted(TEST_FUNCTIONS)}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"unknown sigma mode {self.sigma_mode!r}; expected one of {SIGMA_MODES}")
        if self.tau_form not in TAU_FORMS:
            raise ValueError(f"unknown tau form {self.tau_form!r}; expected one of {TAU_FORMS}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.sigma < 0 or self.delta < 0:
            raise ValueError("sigma and delta must be non-negative")
        if self.grid_size < 1:
            raise ValueError("grid_size must be at least 1")
        TransformShape(self.n, self.J0)
        get_filter(self.filter)

    @property
    def shape(self) -> TransformShape:
        return TransformShape(self.n, self.J0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


def mc_halfwidth(coverage: float, reps: int, level: float = 0.95) -> float:
    """Normal-approximation half-width of a Monte Carlo proportion."""
    z = z_upper((1.0 - level) / 2.0)
    return z * math.sqrt(max(coverage * (1.0 - coverage), 0.0) / reps)


@dataclass
class CoverageReport:
    config: ExperimentConfig
    coverage: float
    covered: int
    avg_radius: float
    radius_sd: float
    halfwidth: float
    wall_time: float = field(default=float("nan"), compare=False)

    def to_dict(self) -> dict:
        # wall time is left out so that reports are reproducible byte for byte
        return {
            "config": self.config.to_dict(),
            "coverage": self.coverage,
            "covered": self.covered,
            "avg_radius": self.avg_radius,
            "radius_sd": self.radius_sd,
            "mc_halfwidth": self.halfwidth,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "CoverageReport":
        return cls(
            ExperimentConfig.from_dict(d["config"]),
            d["coverage"],
            d["covered"],
            d["avg_radius"],
            d["radius_sd"],
            d["mc_halfwidth"],
        )


def build_region(
    coeffs: CoefficientVector,
    method: str,
    sigma_mode: str,
    alpha: float,
    sigma: float | None = None,
    rho: float = DEFAULT_RHO,
    delta: float = 0.0,
    grid_size: int = 21,
    tau_form: str = DEFAULT_TAU_FORM,
) -> ConfidenceBall | DoubleSet:
    """Confidence region for one coefficient vector under the chosen sigma treatment."""
    if sigma_mode == "known":
        if sigma is None:
            raise ValueError("sigma mode 'known' needs sigma")
        region = known_sigma_ball(coeffs, method, sigma, alpha, rho, tau_form)
    elif sigma_mode == "plugin":
        region = plugin_ball(coeffs, method, alpha, rho, tau_form=tau_form)
    elif sigma_mode == "double":
        region = double_set(coeffs, method, alpha, grid_size, "S2", rho, tau_form=tau_form)
    else:
        raise ValueError(f"unknown sigma mode {sigma_mode!r}; expected one of {SIGMA_MODES}")
    if delta > 0:
        if isinstance(region, DoubleSet):
            region = DoubleSet(
                tuple((s2, dilate_for_function_space(b, delta)) for s2, b in region.balls),
                region.q_interval,
                region.alpha,
                region.alpha_tilde,
                region.method,
            )
        else:
            region = dilate_for_function_space(region, delta)
    return region


def _region_radius2(region) -> float:
    return region.max_radius2 if isinstance(region, DoubleSet) else region.radius2


def _replicate(config: ExperimentConfig, truth: np.ndarray, r: int) -> tuple[bool, float]:
    filt = get_filter(config.filter)
    sample = generate_sample(config.function, config.n, config.sigma, config.seed, r)
    coeffs = empirical_coefficients(sample, filt, config.shape)
    region = build_region(
        coeffs,
        config.method,
        config.sigma_mode,
        config.alpha,
        config.sigma,
        config.rho,
        config.delta,
        config.grid_size,
        config.tau_form,
    )
    r2 = _region_radius2(region)
    if not math.isfinite(r2):
        raise NumericalFailure(f"replication {r} produced squared radius {r2}")
    return ball_contains(region, truth), r2


def _run_chunk(config_dict: dict, start: int, stop: int) -> list[tuple[bool, float]]:
    config = ExperimentConfig.from_dict(config_dict)
    truth = true_coefficients(config.function, config.shape, get_filter(config.filter)).values
    return [_replicate(config, truth, r) for r in range(start, stop)]


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError("worker count must be at least 1")
    return workers


def run_coverage(config: ExperimentConfig, workers: int | None = None) -> CoverageReport:
    """Estimate coverage and radius statistics over ``config.replications`` draws.

    ``workers`` defaults to the ``WAVEBALL_WORKERS`` environment variable (1 if unset).
    """
    workers = _resolve_workers(workers)
    reps = config.replications
    t0 = time.perf_counter()
    if workers == 1 or reps < 2:
        results = _run_chunk(config.to_dict(), 0, reps)
    else:
        step = max(1, math.ceil(reps / (4 * workers)))
        bounds = [(s, min(s + step, reps)) for s in range(0, reps, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, config.to_dict(), a, b) for a, b in bounds]
            results = [item for fut in futures for item in fut.result()]
    wall = time.perf_counter() - t0
    covered = sum(1 for c, _ in results if c)
    radii = [math.sqrt(r2) for _, r2 in results]
    mean = math.fsum(radii) / reps
    sd = math.sqrt(math.fsum((r - mean) ** 2 for r in radii) / (reps - 1)) if reps > 1 else 0.0
    coverage = covered / reps
    log.info("%s/%s/%s: %d reps in %.2fs", config.function, config.method, config.sigma_mode, reps, wall)
    return CoverageReport(config, coverage, covered, mean, sd, mc_halfwidth(coverage, reps), wall)


def run_table(
    sigma_mode: str,
    replications: int = PRESETS["ci"],
    seed: int = 0,
    functions=("f0", "f1", "f2"),
    methods=METHODS,
    workers: int | None = None,
    **overrides,
) -> list[CoverageReport]:
    """Every method/function cell of a coverage table for one sigma treatment."""
    out = []
    for m in methods:
        for f in functions:
            cfg = ExperimentConfig(
                function=f, method=m, sigma_mode=sigma_mode, replications=replications, seed=seed, **overrides
            )
            out.append(run_coverage(cfg, workers))
    return out


def format_table(reports: list[CoverageReport]) -> str:
    """Aligned text with one row per method and a coverage/radius pair per function."""
    functions = sorted({r.config.function for r in reports})
    methods = list(dict.fromkeys(r.config.method for r in reports))
    cell = {(r.config.method, r.config.function): r for r in reports}
    head = f"{'method':<12}" + "".join(f"{f + ' cov':>10}{f + ' rad':>10}" for f in functions)
    lines = [head]
    for m in methods:
        row = f"{m:<12}"
        for f in functions:
            r = cell.get((m, f))
            row += f"{r.coverage:>10.3f}{r.avg_radius:>10.3f}" if r else f"{'':>20}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def table_csv(reports: list[CoverageReport]) -> str:
    rows = ["method,function,sigma_mode,coverage,avg_radius,radius_sd,mc_halfwidth"]
    for r in reports:
        c = r.config
        rows.append(
            f"{c.method},{c.function},{c.sigma_mode},{r.coverage!r},{r.avg_radius!r},{r.radius_sd!r},{r.halfwidth!r}"
        )
    return "\n".join(rows) + "\n"


def chisq_baseline_radius(n: int, sigma: float, alpha: float) -> tuple[float, float]:
    """``(sigma^2 chi2_{1-alpha, n} / n, its square root)`` for the unsmoothed ball.

    The first entry is the squared radius; at n = 1024, alpha = 0.05 it is
    about 1.074 while the radius itself is about 1.036.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    r2 = sigma**2 * float(chi2.isf(alpha, n)) / n
    return r2, math.sqrt(r2)


@dataclass(frozen=True)
class FitResult:
    coefficients: CoefficientVector
    region: ConfidenceBall | DoubleSet
    curve: np.ndarray

    def record(self) -> dict:
        return self.region.to_record()


def _center_ball(region) -> ConfidenceBall:
    if isinstance(region, ConfidenceBall):
        return region
    # the member ball at the middle of the sigma^2 grid
    return region.balls[len(region.balls) // 2][1]


def fit_curve(
    y,
    method: str = "sure-level",
    sigma_mode: str = "plugin",
    alpha: float = 0.05,
    sigma: float | None = None,
    J0: int = 4,
    filter: str = "s8",
    rho: float = DEFAULT_RHO,
    delta: float = 0.0,
    grid_size: int = 21,
    tau_form: str = DEFAULT_TAU_FORM,
) -> FitResult:
    """Full pipeline on user samples taken at ``x_i = i/n``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("samples must be a 1-D sequence")
    if not np.all(np.isfinite(y)):
        raise ValueError("samples contain non-finite values")
    filt = get_filter(filter)
    shape = TransformShape(y.size, J0)
    coeffs = empirical_coefficients(y, filt, shape)
    region = build_region(coeffs, method, sigma_mode, alpha, sigma, rho, delta, grid_size, tau_form)
    if not math.isfinite(_region_radius2(region)):
        raise NumericalFailure("non-finite squared radius")
    curve = estimate_curve(_center_ball(region).center, filt)
    return FitResult(coeffs, region, curve)
