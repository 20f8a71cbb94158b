import json
import math

import numpy as np
import pytest

from waveball.confidence import ConfidenceBall, DoubleSet
from waveball.harness import (
    PUBLISHED_KNOWN_SIGMA,
    PUBLISHED_PLUGIN,
    PRESETS,
    CoverageReport,
    ExperimentConfig,
    build_region,
    chisq_baseline_radius,
    fit_curve,
    format_table,
    mc_halfwidth,
    run_coverage,
    run_table,
    table_csv,
)
from waveball.signals import empirical_coefficients, eval_test_function, generate_sample
from waveball.wavelets import SYMMLET8, TransformShape


def test_presets_and_published_values():
    assert PRESETS == {"ci": 1000, "full": 5000}
    assert len(PUBLISHED_KNOWN_SIGMA) == len(PUBLISHED_PLUGIN) == 12
    assert PUBLISHED_KNOWN_SIGMA[("universal", "f0")] == (0.951, 0.274)
    assert PUBLISHED_PLUGIN[("modulator", "f2")] == 0.951


@pytest.mark.parametrize(
    "bad",
    [
        {"method": "lasso"},
        {"sigma_mode": "guess"},
        {"function": "f7"},
        {"replications": 0},
        {"alpha": 1.0},
        {"n": 1000},
        {"J0": 10},
        {"filter": "db4x"},
        {"sigma": -1.0},
        {"tau_form": "other"},
        {"grid_size": 0},
    ],
)
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ExperimentConfig(**bad)


def test_config_round_trip():
    cfg = ExperimentConfig(function="f2", method="modulator", replications=7, seed=3)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({**cfg.to_dict(), "extra": 1})


def test_mc_halfwidth():
    assert mc_halfwidth(0.95, 5000) <= 0.0125
    assert mc_halfwidth(0.5, 5000) <= 0.0139
    assert mc_halfwidth(1.0, 10) == 0.0


def test_degenerate_zero_noise_covers():
    for method in ("universal", "sure-level", "modulator"):
        rep = run_coverage(ExperimentConfig(function="f2", sigma=0.0, method=method, replications=5), workers=1)
        assert rep.coverage == 1.0 and rep.avg_radius == 0.0


def test_report_json_round_trip():
    rep = run_coverage(ExperimentConfig(function="f1", n=256, replications=20, seed=4), workers=1)
    text = rep.to_json()
    back = CoverageReport.from_dict(json.loads(text))
    assert back.to_json() == text
    assert back == rep
    assert "wall_time" not in json.loads(text)
    assert 0.0 <= rep.coverage <= 1.0 and rep.covered == round(rep.coverage * 20)


def test_serial_parallel_identical():
    cfg = ExperimentConfig(function="f2", n=256, method="modulator", sigma_mode="plugin", replications=30, seed=9)
    assert run_coverage(cfg, workers=1).to_json() == run_coverage(cfg, workers=3).to_json()


def test_workers_env(monkeypatch):
    cfg = ExperimentConfig(n=64, J0=2, replications=3)
    monkeypatch.setenv("WAVEBALL_WORKERS", "zero")
    with pytest.raises(ValueError):
        run_coverage(cfg)
    monkeypatch.setenv("WAVEBALL_WORKERS", "2")
    assert run_coverage(cfg).to_json() == run_coverage(cfg, workers=1).to_json()


def test_build_region_modes():
    shape = TransformShape(256)
    c = empirical_coefficients(generate_sample("f1", 256, 1.0, 0), SYMMLET8, shape)
    assert isinstance(build_region(c, "universal", "known", 0.05, 1.0), ConfidenceBall)
    assert isinstance(build_region(c, "universal", "plugin", 0.05), ConfidenceBall)
    ds = build_region(c, "universal", "double", 0.05, grid_size=3)
    assert isinstance(ds, DoubleSet)
    grown = build_region(c, "universal", "double", 0.05, grid_size=3, delta=0.1)
    bump = 0.1 * math.log(256) / 16
    for (_, a), (_, b) in zip(ds.balls, grown.balls):
        assert b.radius2 == pytest.approx(a.radius2 + bump)
    with pytest.raises(ValueError):
        build_region(c, "universal", "known", 0.05)
    with pytest.raises(ValueError):
        build_region(c, "universal", "other", 0.05)


def test_run_table_and_formats():
    reps = run_table("known", replications=3, seed=1, functions=("f0", "f2"), methods=("universal",), n=64, J0=2)
    assert [r.config.function for r in reps] == ["f0", "f2"]
    text = format_table(reps)
    assert text.splitlines()[0].split()[:3] == ["method", "f0", "cov"]
    csv_lines = table_csv(reps).splitlines()
    assert csv_lines[0].startswith("method,function") and len(csv_lines) == 3


def test_chisq_baseline():
    r2, r = chisq_baseline_radius(1024, 1.0, 0.05)
    assert r2 == pytest.approx(1.0738, abs=1e-3)
    assert r == pytest.approx(1.0363, abs=1e-3)
    assert chisq_baseline_radius(1024, 2.0, 0.05)[1] == pytest.approx(2 * r, rel=1e-14)
    assert chisq_baseline_radius(100_000, 1.0, 0.5)[0] == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError):
        chisq_baseline_radius(0, 1.0, 0.05)


def test_fit_curve_noiseless_round_trip():
    y = eval_test_function("f2", np.arange(1, 1025) / 1024)
    fit = fit_curve(y, "universal", "known", sigma=0.0)
    assert np.max(np.abs(fit.curve - y)) < 1e-8
    assert fit.record()["radius2"] == 0.0


def test_fit_curve_modes_and_errors():
    y = generate_sample("f1", 256, 1.0, 2).y
    a = fit_curve(y)
    b = fit_curve(y)
    assert np.array_equal(a.curve, b.curve) and a.record() == b.record()
    ds = fit_curve(y, sigma_mode="double", grid_size=3)
    assert ds.record()["sigma_mode"] == "double" and ds.curve.size == 256
    for bad in (np.zeros(100), np.zeros((4, 4)), np.array([1.0, np.nan] * 32)):
        with pytest.raises(ValueError):
            fit_curve(bad)


def test_fit_band_covers_step():
    # the (0.6, 0.8) window of f2 averages 2.0; check it is inside the interval most of the time
    from waveball.functionals import functional_interval, local_average

    shape = TransformShape(1024)
    T = local_average(0.6, 0.8, shape=shape)
    hits = sum(
        functional_interval(T, fit_curve(generate_sample("f2", 1024, 1.0, 77, r).y).region).contains(2.0)
        for r in range(100)
    )
    assert hits >= 94
