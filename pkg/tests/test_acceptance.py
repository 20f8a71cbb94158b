"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one PASS/FAIL line and records it for the end-of-run summary.
Monte Carlo seeds are fixed up front (seed 0 for the coverage tables) and are
not tuned to the outcome.
"""

import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from oracles import modulator_objective, monotone_grid_oracle, partial_moment_quad, sure_direct, sure_on_grid
from waveball.confidence import ball_contains, known_sigma_ball, plugin_ball
from waveball.estimators import minimize_sure, monotone_modulator
from waveball.functionals import LinearFunctional, default_widening, functional_interval, local_average, simultaneous_intervals
from waveball.harness import PUBLISHED_KNOWN_SIGMA, PUBLISHED_PLUGIN, ExperimentConfig, chisq_baseline_radius, run_coverage
from waveball.pivot import gaussian_partial, simulate_pivot, theoretical_variance, z_contribution
from waveball.signals import empirical_coefficients, generate_sample, true_coefficients
from waveball.variance import SigmaEstimate, high_component_sigma2, sigma_interval
from waveball.wavelets import HAAR, SYMMLET8, CoefficientVector, TransformShape, dwt_array, idwt_array

pytestmark = pytest.mark.slow

SEED = 0
METHODS = ("universal", "sure-global", "sure-level", "modulator")
FUNCTIONS = ("f0", "f1", "f2")


@pytest.fixture
def report(acceptance_log, capsys):
    def emit(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        acceptance_log.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def test_criterion_01_table1_known_sigma(report):
    bad, worst_cov, worst_rad = [], 0.0, 0.0
    for m in METHODS:
        for f in FUNCTIONS:
            rep = run_coverage(ExperimentConfig(function=f, method=m, sigma_mode="known", replications=1000, seed=SEED))
            cov_p, rad_p = PUBLISHED_KNOWN_SIGMA[(m, f)]
            rad_tol = 0.05 if f == "f2" else 0.015
            dc, dr = rep.coverage - cov_p, rep.avg_radius - rad_p
            worst_cov = max(worst_cov, abs(dc))
            worst_rad = max(worst_rad, abs(dr) / rad_tol)
            if abs(dc) > 0.03 or abs(dr) > rad_tol:
                bad.append(f"{m}/{f} cov {rep.coverage:.3f} ({dc:+.3f}) rad {rep.avg_radius:.3f} ({dr:+.3f})")
    detail = f"12 cells, max |coverage gap| {worst_cov:.3f}, max radius gap {worst_rad:.2f} of tolerance"
    ok = report(1, not bad, detail + ("; out of tolerance: " + "; ".join(bad) if bad else ""))
    assert ok, bad


def test_criterion_02_table2_plugin(report):
    bad, worst = [], 0.0
    for m in METHODS:
        for f in FUNCTIONS:
            rep = run_coverage(ExperimentConfig(function=f, method=m, sigma_mode="plugin", replications=1000, seed=SEED))
            d = rep.coverage - PUBLISHED_PLUGIN[(m, f)]
            worst = max(worst, abs(d))
            if abs(d) > 0.03:
                bad.append(f"{m}/{f} cov {rep.coverage:.3f} ({d:+.3f})")
    ok = report(2, not bad, f"12 cells, max |coverage gap| {worst:.3f}" + ("; " + "; ".join(bad) if bad else ""))
    assert ok, bad


def test_criterion_03_pivot_limit(report):
    shape = TransformShape(1024)
    mu = true_coefficients("f0", shape).values
    draws = simulate_pivot(mu, 1.0, 1.0, 2000, seed=SEED, shape=shape)
    mean, var = draws.mean(), draws.var(ddof=1)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    ok_mean = abs(mean) <= 3 * se
    ok_var = abs(var / 2.0 - 1) <= 0.10

    rng = np.random.default_rng(SEED)
    n, reps = 256, 10_000
    rho = math.sqrt(2 * math.log(n))
    rel = []
    for _ in range(10):
        m = np.zeros(n)
        k = int(rng.integers(3, 26))
        m[rng.choice(n, k, replace=False)] = rng.normal(0, 0.3, k)
        u = float(rng.uniform(0.72, 1.0))
        eps = rng.standard_normal((reps, n))
        b = z_contribution(eps, -math.sqrt(n) * m, u, rho, 1.0, n).sum(axis=1)
        rel.append(b.var(ddof=1) / theoretical_variance(m, u, 1.0) - 1)
    ok_theory = max(abs(r) for r in rel) <= 0.05
    ok = report(
        3,
        ok_mean and ok_var and ok_theory,
        f"mean {mean:+.4f} (3 SE = {3 * se:.4f}), var {var:.4f} vs 2, "
        f"closed-form vs MC worst {max(rel, key=abs):+.2%} over 10 sparse signals",
    )
    assert ok


def test_criterion_04_d_functions(report):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for i in range(1000):
        s, t = np.sort(rng.normal(0, 3, 2))
        if i % 4 == 1:
            s = -math.inf
        elif i % 4 == 2:
            t = math.inf
        q = [partial_moment_quad(k, s, t) for k in range(5)]
        ref = {"D1": q[1], "D2": q[2], "D3": q[3] - q[1], "D4": q[4] - 2 * q[2] + q[0]}
        for kind in ref:
            worst = max(worst, abs(gaussian_partial(kind, s, t) - ref[kind]))
    ok = report(4, worst < 1e-8, f"1000 intervals (half semi-infinite), max |closed form - quadrature| {worst:.2e}")
    assert ok


def test_criterion_05_optimizer_oracles(report):
    rng = np.random.default_rng(SEED)
    sure_gap, knot_gap = -math.inf, 0.0
    for _ in range(200):
        m = int(rng.integers(8, 513))
        n = 2 ** math.ceil(math.log2(2 * m))
        shape = TransformShape(n, int(math.log2(n)) - 1)
        vals = np.zeros(n)
        sigma = float(rng.uniform(0.5, 2.0))
        scale = sigma / math.sqrt(n)
        vals[n // 2 : n // 2 + m] = scale * rng.normal(size=m) * rng.uniform(0.3, 2.0)
        c = CoefficientVector(vals, shape)
        sched = minimize_sure(c, "global", sigma)
        s2 = sigma**2 / n
        x = c.details
        got = sure_direct(x, sched.t[0], s2)
        grid = np.linspace(0.72 * sched.r_n, sched.r_n, 10_000)
        sure_gap = max(sure_gap, got - sure_on_grid(x, grid, s2).min())
        # exact reference: the minimum sits at the lower end or at a knot |x_i| in range
        knots = [0.72 * sched.r_n] + [v for v in np.abs(x) if 0.72 * sched.r_n <= v <= sched.r_n] + [sched.r_n]
        knot_gap = max(knot_gap, abs(got - min(sure_direct(x, k, s2) for k in knots)))

    mod_gap, chain_ok, slack_ok = -math.inf, True, True
    for i in range(200):
        n, J0 = [(64, 0), (128, 1), (256, 1)][i % 3]
        shape = TransformShape(n, J0)
        mu = np.zeros(n)
        k = int(rng.integers(1, n // 3))
        mu[rng.choice(n, k, replace=False)] = rng.normal(0, 1, k) * rng.uniform(0, 4) / math.sqrt(n)
        c = CoefficientVector(mu + rng.normal(size=n) / math.sqrt(n), shape)
        plan = monotone_modulator(c, 1.0)
        blocks = [c.values[sl] for sl in shape.blocks()]
        xi = (plan.xi_phi,) + plan.xi
        got = modulator_objective(blocks, xi, 1.0 / n)
        grid_min = monotone_grid_oracle(blocks, 1.0 / n, 0.001)
        mod_gap = max(mod_gap, got - grid_min)
        # rounding the optimum to the grid costs at most gradient * step/2 + weight * (step/2)^2 per block
        slack = sum(float(np.sum(b**2)) * (0.001 + 0.0005**2) * 2 for b in blocks)
        slack_ok &= grid_min - got <= slack
        chain = (1.0,) + xi
        chain_ok &= all(a >= b for a, b in zip(chain, chain[1:])) and chain[-1] >= 0.0
    ok = sure_gap <= 1e-12 and knot_gap <= 1e-12 and mod_gap <= 1e-9 and chain_ok and slack_ok
    report(
        5,
        ok,
        f"SURE: returned - grid min <= {sure_gap:.1e}, |returned - exact knot min| <= {knot_gap:.1e}; "
        f"modulator: returned - grid min <= {mod_gap:.1e}, chain nonincreasing {chain_ok}",
    )
    assert ok


def test_criterion_06_transform(report):
    rng = np.random.default_rng(SEED)
    rec = 0.0
    for n in (64, 256, 1024):
        for filt in (SYMMLET8, HAAR):
            x = rng.normal(size=(20, n))
            rec = max(rec, float(np.max(np.abs(idwt_array(dwt_array(x, filt, 2), filt, 2) - x))))
    x = rng.normal(size=(100, 1024))
    pars = float(np.max(np.abs(np.linalg.norm(dwt_array(x, SYMMLET8, 4), axis=1) / np.linalg.norm(x, axis=1) - 1)))
    h = SYMMLET8.h
    filt_err = max(abs(math.fsum(h) - math.sqrt(2)), abs(math.fsum(h * h) - 1.0))
    ok = rec < 1e-10 and pars < 1e-12 and filt_err < 1e-12
    report(6, ok, f"reconstruction {rec:.1e}, Parseval {pars:.1e}, filter sums {filt_err:.1e}")
    assert ok


def test_criterion_07_variance_machinery(report):
    shape = TransformShape(1024)
    s2 = np.array(
        [
            high_component_sigma2(empirical_coefficients(generate_sample("f0", 1024, 1.0, SEED, r), SYMMLET8, shape)).sigma2_hat
            for r in range(2000)
        ]
    )
    mean = s2.mean()
    v = np.var(math.sqrt(1024) * (s2 - 1.0), ddof=1)
    q_cov = np.mean([lo <= 1.0 <= hi for lo, hi in (sigma_interval(SigmaEstimate(x), 1024, 0.05) for x in s2)])
    doubles = {
        m: run_coverage(ExperimentConfig(function="f0", method=m, sigma_mode="double", replications=1000, seed=SEED)).coverage
        for m in METHODS
    }
    ok = 0.98 <= mean <= 1.02 and abs(v / 4 - 1) <= 0.15 and q_cov >= 0.93 and min(doubles.values()) >= 0.93
    report(
        7,
        ok,
        f"mean sigma2_hat {mean:.4f}, var of sqrt(n)(s2-1) {v:.3f} vs 4, Q_n coverage {q_cov:.3f}, "
        "double-set coverage " + ", ".join(f"{m} {c:.3f}" for m, c in doubles.items()),
    )
    assert ok


def test_criterion_08_functionals(report):
    rng = np.random.default_rng(SEED)
    shape = TransformShape(1024)
    worst = -math.inf
    for seed in range(5):
        c = empirical_coefficients(generate_sample("f1", 1024, 1.0, SEED, seed), SYMMLET8, shape)
        ball = known_sigma_ball(c, "sure-level", 1.0, 0.05)
        w = rng.normal(size=1024)
        iv = functional_interval(LinearFunctional(w), ball)
        d = rng.normal(size=(100_000, 1024))
        d *= ball.radius / np.linalg.norm(d, axis=1, keepdims=True)
        vals = (ball.center.values + d) @ w
        worst = max(worst, vals.max() - iv.upper, iv.lower - vals.min())
    starts = rng.uniform(0, 0.9, 25)
    Ts = [local_average(a, a + 0.1, shape=shape) for a in starts]
    mu = true_coefficients("f1", shape)
    truth = [T(mu) for T in Ts]
    w_n = default_widening(1024, 0.1)
    hits = {"known": 0, "plugin": 0}
    for r in range(500):
        c = empirical_coefficients(generate_sample("f1", 1024, 1.0, SEED + 1, r), SYMMLET8, shape)
        for mode, ball in (("known", known_sigma_ball(c, "sure-level", 1.0, 0.05)), ("plugin", plugin_ball(c, "sure-level", 0.05))):
            ivs = simultaneous_intervals(Ts, ball, w_n)
            hits[mode] += all(iv.contains(t) for iv, t in zip(ivs, truth))
    cov = {k: v / 500 for k, v in hits.items()}
    ok = worst <= 1e-9 and min(cov.values()) >= 0.94
    report(
        8,
        ok,
        f"random boundary search minus closed-form extreme, max {worst:.2e}; simultaneous coverage of 25 windows "
        f"known {cov['known']:.3f}, plug-in {cov['plugin']:.3f}",
    )
    assert ok


def test_criterion_09_baseline(report):
    r2, r = chisq_baseline_radius(1024, 1.0, 0.05)
    ok = abs(r2 - 1.0738) <= 0.001
    report(9, ok, f"squared radius {r2:.5f} (radius {r:.5f})")
    assert ok


def test_criterion_10_determinism(report, tmp_path):
    exe = shutil.which("waveball")
    base = [exe] if exe else [sys.executable, "-m", "waveball.cli"]
    args = ["simulate", "--function", "f2", "--method", "modulator", "--sigma-mode", "plugin", "--reps", "200", "--seed", "17"]
    outs = []
    for i, extra in enumerate([[], [], ["--workers", "2"], ["--workers", "3"]]):
        path = tmp_path / f"r{i}.json"
        subprocess.run(base + args + extra + ["--out", str(path)], check=True, capture_output=True)
        outs.append(path.read_bytes())
    ok = all(o == outs[0] for o in outs)
    report(10, ok, f"4 simulate runs (2 serial, 2 and 3 workers): {'byte-identical' if ok else 'differ'}")
    assert ok
