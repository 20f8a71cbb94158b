"""Command-line entry point: ``waveball <command> ...``.

Exit codes: 0 on success, 2 for bad configuration or input, 3 when a
computation produces non-finite results.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time

import numpy as np

from . import __version__
from .confidence import DEFAULT_TAU_FORM, METHODS, SIGMA_MODES, TAU_FORMS
from .estimators import DEFAULT_RHO
from .functionals import default_widening, local_average, point_evaluator, simultaneous_intervals
from .harness import (
    PRESETS,
    ExperimentConfig,
    chisq_baseline_radius,
    fit_curve,
    format_table,
    run_coverage,
    run_table,
    table_csv,
)
from .pivot import simulate_pivot, theoretical_variance
from .signals import TEST_FUNCTIONS, generate_sample, true_coefficients
from .wavelets import TransformShape, get_filter

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("waveball")


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _read_samples(path: str) -> np.ndarray:
    try:
        y = np.loadtxt(path, dtype=float, ndmin=1, delimiter=None)
    except ValueError as exc:
        raise ValueError(f"could not parse samples in {path}: {exc}") from None
    if y.ndim != 1:
        y = y.ravel()
    return y


def _add_ball_options(p: argparse.ArgumentParser, default_mode: str) -> None:
    p.add_argument("--method", choices=METHODS, default="sure-level")
    p.add_argument("--sigma-mode", choices=SIGMA_MODES, default=default_mode)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--J0", type=int, default=4, help="coarsest level kept as scaling block")
    p.add_argument("--filter", default="s8", help="s8 (symmlet 8) or haar")
    p.add_argument("--rho", type=float, default=DEFAULT_RHO, help="lower threshold bound as a fraction of r_n")
    p.add_argument("--delta", type=float, default=0.0, help="function-space dilation constant")
    p.add_argument("--grid-size", type=int, default=21, help="sigma^2 grid for the double set")
    p.add_argument("--tau-form", choices=TAU_FORMS, default=DEFAULT_TAU_FORM)


def _config_from(args) -> ExperimentConfig:
    reps = PRESETS[args.preset] if args.reps is None else args.reps
    return ExperimentConfig(
        function=args.function,
        n=args.n,
        sigma=args.sigma,
        alpha=args.alpha,
        method=args.method,
        sigma_mode=args.sigma_mode,
        replications=reps,
        seed=args.seed,
        J0=args.J0,
        filter=args.filter,
        rho=args.rho,
        delta=args.delta,
        grid_size=args.grid_size,
        tau_form=args.tau_form,
    )


def cmd_simulate(args) -> int:
    report = run_coverage(_config_from(args), args.workers)
    _write(report.to_json(), args.out)
    print(f"wall time {report.wall_time:.2f}s", file=sys.stderr)
    return 0


def cmd_table(args) -> int:
    t0 = time.perf_counter()
    overrides = dict(
        n=args.n, sigma=args.sigma, alpha=args.alpha, J0=args.J0, filter=args.filter,
        rho=args.rho, delta=args.delta, grid_size=args.grid_size, tau_form=args.tau_form,
    )
    reps = PRESETS[args.preset] if args.reps is None else args.reps
    reports = run_table(args.sigma_mode, reps, args.seed, workers=args.workers, **overrides)
    _write(table_csv(reports) if args.format == "csv" else format_table(reports), args.out)
    print(f"wall time {time.perf_counter() - t0:.2f}s", file=sys.stderr)
    return 0


def cmd_sample(args) -> int:
    s = generate_sample(args.function, args.n, args.sigma, args.seed, args.replication)
    _write("".join(f"{float(v)!r}\n" for v in s.y), args.out)
    return 0


def _fit(args):
    y = _read_samples(args.input)
    if args.sigma_mode == "known" and args.sigma is None:
        raise ValueError("--sigma-mode known needs --sigma")
    return fit_curve(
        y, args.method, args.sigma_mode, args.alpha, args.sigma, args.J0, args.filter,
        args.rho, args.delta, args.grid_size, args.tau_form,
    )


def _band_rows(args, fit) -> str:
    shape = fit.coefficients.shape
    filt = get_filter(args.filter)
    Ts = [local_average(a, b, filt, shape) for a, b in args.window]
    Ts += [point_evaluator(i, filt, shape) for i in args.point]
    if not Ts:
        raise ValueError("give at least one --window a:b or --point i")
    if args.w_n is not None:
        w_n = args.w_n
    elif args.delta_n is not None:
        w_n = default_widening(shape.n, args.delta_n)
    else:
        w_n = 0.0
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["descriptor", "lower", "upper"])
    for iv in simultaneous_intervals(Ts, fit.region, w_n):
        writer.writerow([iv.descriptor, repr(float(iv.lower)), repr(float(iv.upper))])
    return buf.getvalue()


def cmd_fit(args) -> int:
    fit = _fit(args)
    n = fit.curve.size
    curve = ["x,y,fitted"]
    samples = _read_samples(args.input)
    for i in range(n):
        curve.append(f"{(i + 1) / n!r},{float(samples[i])!r},{float(fit.curve[i])!r}")
    _write(json.dumps(fit.record(), sort_keys=True) + "\n", args.out_json)
    if args.out_curve:
        _write("\n".join(curve) + "\n", args.out_curve)
    if args.window or args.point:
        _write(_band_rows(args, fit), args.out_band)
    return 0


def cmd_band(args) -> int:
    fit = _fit(args)
    _write(_band_rows(args, fit), args.out)
    return 0


def cmd_diagnose(args) -> int:
    header = f"{'n':>6} {'method':>14} {'mean':>10} {'var':>10} {'theory':>10} {'discrep':>9}"
    lines = [header]
    for n in args.n:
        shape = TransformShape(n, args.J0)
        mu = true_coefficients(args.function, shape, get_filter(args.filter)).values
        # scaling coefficients are never thresholded
        u_vec = np.zeros(n)
        for u in args.u:
            u_vec[shape.n_scaling :] = u
            draws = simulate_pivot(mu, u, args.sigma, args.reps, args.seed, shape)
            mean = math.fsum(draws) / draws.size
            var = float(np.var(draws, ddof=1))
            theory = theoretical_variance(mu, u_vec, args.sigma)
            label = "universal" if u == 1.0 else f"fixed u={u:g}"
            lines.append(
                f"{n:>6} {label:>14} {mean:>10.4f} {var:>10.4f} {theory:>10.4f} {var / theory - 1:>+9.2%}"
            )
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_baseline(args) -> int:
    r2, r = chisq_baseline_radius(args.n, args.sigma, args.alpha)
    _write(f"squared_radius {r2:.6f}\nradius {r:.6f}\n", args.out)
    return 0


def _window(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like a:b, got {text!r}") from None
    return a, b


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="waveball", description="Wavelet confidence balls and coverage experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def experiment_opts(p):
        p.add_argument("--n", type=int, default=1024)
        p.add_argument("--sigma", type=float, default=1.0)
        p.add_argument("--reps", type=_positive_int, default=None)
        p.add_argument("--preset", choices=sorted(PRESETS), default="ci", help="replication count when --reps is absent")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=_positive_int, default=None, help="processes (default: $WAVEBALL_WORKERS or 1)")
        p.add_argument("--out", default=None)

    p = sub.add_parser("simulate", help="Monte Carlo coverage for one configuration")
    p.add_argument("--function", choices=sorted(TEST_FUNCTIONS), default="f1")
    experiment_opts(p)
    _add_ball_options(p, "known")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table", help="coverage table over all methods and test functions")
    experiment_opts(p)
    _add_ball_options(p, "known")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sample", help="write a noisy test-function sample, one value per line")
    p.add_argument("--function", choices=sorted(TEST_FUNCTIONS), default="f1")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sample)

    def data_opts(p):
        p.add_argument("input", help="whitespace-separated samples at x_i = i/n")
        p.add_argument("--sigma", type=float, default=None, help="noise level for --sigma-mode known")
        _add_ball_options(p, "plugin")
        p.add_argument("--window", type=_window, action="append", default=[], metavar="A:B")
        p.add_argument("--point", type=int, action="append", default=[], metavar="I", help="1-based design index")
        p.add_argument("--w-n", type=float, default=None, help="interval widening")
        p.add_argument("--delta-n", type=float, default=None, help="use the default widening log n / (n delta_n)")

    p = sub.add_parser("fit", help="fit a curve and confidence ball to a sample file")
    data_opts(p)
    p.add_argument("--out-json", default=None, help="ball record (default stdout)")
    p.add_argument("--out-curve", default=None, help="CSV of x, y, fitted")
    p.add_argument("--out-band", default=None, help="CSV of functional intervals")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("band", help="intervals for window averages or point values")
    data_opts(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_band)

    p = sub.add_parser("diagnose", help="pivot variance: Monte Carlo against the closed form")
    p.add_argument("--function", choices=sorted(TEST_FUNCTIONS), default="f0")
    p.add_argument("--n", type=int, action="append", default=None)
    p.add_argument("--u", type=float, action="append", default=None)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--reps", type=_positive_int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--J0", type=int, default=4)
    p.add_argument("--filter", default="s8")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("baseline", help="radius of the unsmoothed chi-square ball")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "diagnose":
        args.n = args.n or [64, 256, 1024]
        args.u = args.u or [1.0]
    try:
        return args.func(args)
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"waveball: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as exc:
        print(f"waveball: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
