"""Command-line front end.

Subcommands ``estimate``, ``test``, ``gcurve`` and ``simulate`` write JSON
reports and CSV tables into ``--out``. Exit codes: 0 success, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapPlan, Target, run_bootstrap
from .errors import DataError, NumericalError, PanelFactorError
from .estimator import CurveMethod, GCurve, cce_pooled_fit, default_grid, fit, g_curve, naive_fit
from .kernels import BandwidthSpec
from .local_linear import LocalLinearSmoother
from .panel_data import ColumnMap, load_csv
from .simulation import StudyGrid, run_study, write_report
from .spec_test import PairKernel, run_test
from ._parallel import resolve_workers

log = logging.getLogger("panelfactor")

DEFAULT_SEED = 20240601
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _names(text):
    return tuple(s.strip() for s in text.split(",") if s.strip()) if text else ()


def _bandwidth(text):
    if text is None or text.strip().lower() == "auto":
        return None
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or comma-separated reals: {text}") from exc
    return values


def _clean(value):
    """JSON-safe floats: NaN and infinities become null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _write_json(path, payload):
    path.write_text(json.dumps(_clean(payload), indent=2) + "\n")


def _load(args):
    spec = ColumnMap(unit=args.unit, time=args.time, y=args.y, x=_names(args.x), w=_names(args.w),
                     time_only=_names(args.time_only))
    try:
        return load_csv(args.input, spec)
    except FileNotFoundError as exc:
        raise DataError(f"input file not found: {args.input}") from exc


def _bandwidths(args, ds):
    return BandwidthSpec.rule_of_thumb(ds, h_est=args.bandwidth, h_test=args.test_bandwidth)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_curve(path, ds, curve):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*ds.w_names, "g_hat", "se", "lower", "upper", "method"])
        for k in range(len(curve.g_hat)):
            writer.writerow([*curve.grid[k].tolist(), curve.g_hat[k], curve.se_pointwise[k],
                             curve.lower[k], curve.upper[k], curve.method.value])


def cmd_estimate(args) -> int:
    ds = _load(args)
    bw = _bandwidths(args, ds)
    workers = resolve_workers(args.workers)
    smoother = LocalLinearSmoother(ds.w, bw.h_est, workers)
    result = fit(ds, bw, smoother=smoother)
    payload = {
        "n_units": ds.n_units, "n_periods": ds.n_periods, "n_obs": ds.n_obs, "y": ds.y_name,
        "x": list(ds.x_names), "w": list(ds.w_names),
        "coefficients": result.coefficient_table(),
        "vcov_beta": result.vcov_beta, "bandwidths": bw.to_dict(),
        "bootstrap": None, "comparators": {},
    }
    grid = default_grid(ds.w)
    if args.bootstrap:
        plan = BootstrapPlan(args.bootstrap, args.seed,
                             targets=frozenset({Target.BETA_MOMENTS, Target.G_BANDS}))
        rep = run_bootstrap(ds, bw, result, plan, grid=grid, level=args.ci_level, workers=workers,
                            smoother=smoother)
        payload["bootstrap"] = {"n_replications": rep.n_replications, "seed": rep.seed,
                                "beta_bias": rep.beta_bias, "beta_sd": rep.beta_sd}
        g_hat = smoother.at(grid, ds.y - ds.x @ result.beta_hat)
        curve = GCurve(grid, g_hat, (rep.g_band_hi - rep.g_band_lo) / 2, rep.g_band_lo, rep.g_band_hi,
                       CurveMethod.BOOTSTRAP, args.ci_level)
    else:
        curve = g_curve(result, ds, grid, method="plugin", level=args.ci_level, workers=workers)
    comparators = _names(args.comparators)
    unknown = set(comparators) - {"naive", "cce"}
    if unknown:
        raise DataError(f"unknown comparators: {sorted(unknown)}")
    for name in comparators:
        try:
            cfit = naive_fit(ds) if name == "naive" else cce_pooled_fit(ds)
        except NumericalError as exc:
            payload["comparators"][name] = {"error": f"{type(exc).__name__}: {exc}"}
            continue
        payload["comparators"][name] = {
            "method": cfit.method,
            "coefficients": [{"name": n, "estimate": b, "std_error": s}
                             for n, b, s in zip(ds.x_names, cfit.beta_hat, cfit.std_errors)],
        }
    out = _out(args)
    _write_json(out / "fit.json", payload)
    _write_curve(out / "ghat.csv", ds, curve)
    for row in result.coefficient_table():
        print(f"{row['name']:>12s}  {row['estimate']: .6f}  (se {row['std_error']:.6f})")
    return EXIT_OK


def cmd_test(args) -> int:
    ds = _load(args)
    bw = _bandwidths(args, ds)
    workers = resolve_workers(args.workers)
    smoother = LocalLinearSmoother(ds.w, bw.h_est, workers)
    result = fit(ds, bw, smoother=smoother)
    pk = PairKernel(ds.chi, bw.h_test, ds.n_units, ds.n_periods, workers)
    test = run_test(ds, bw, result, pair_kernel=pk)
    payload = test.to_dict()
    payload["n_failed"] = 0
    if args.bootstrap:
        plan = BootstrapPlan(args.bootstrap, args.seed, targets=frozenset({Target.TEST_PVALUE}))
        rep = run_bootstrap(ds, bw, result, plan, workers=workers, smoother=smoother, pair_kernel=pk,
                            observed=test.standardized)
        payload.update(p_bootstrap=rep.test_pvalue, n_bootstrap=rep.n_replications, n_failed=rep.n_failed,
                       seed=rep.seed)
        test = replace(test, p_bootstrap=rep.test_pvalue, n_bootstrap=rep.n_replications)
    payload["h_est"] = bw.h_est
    _write_json(_out(args) / "test.json", payload)
    print(test.summary_line())
    return EXIT_OK


def cmd_gcurve(args) -> int:
    ds = _load(args)
    bw = _bandwidths(args, ds)
    workers = resolve_workers(args.workers)
    result = fit(ds, bw, workers=workers)
    grid = None
    if args.points:
        frame = np.genfromtxt(args.points, delimiter=",", names=True)
        try:
            grid = np.column_stack([np.atleast_1d(frame[name]) for name in ds.w_names])
        except (ValueError, KeyError) as exc:
            raise DataError(f"points file must have columns {list(ds.w_names)}") from exc
    curve = g_curve(result, ds, grid, method=args.ci_method, level=args.ci_level,
                    n_boot=args.bootstrap or 199, seed=args.seed, workers=workers)
    _write_curve(_out(args) / "gcurve.csv", ds, curve)
    return EXIT_OK


def cmd_simulate(args) -> int:
    grid = StudyGrid.from_json(args.grid)
    if args.seed_given:
        grid = replace(grid, seed=args.seed)
    report = run_study(grid, workers=resolve_workers(args.workers))
    paths = write_report(report, _out(args))
    print(f"recipe {report.recipe_version}: {report.recipe}")
    for c in report.cells:
        rej = ", ".join(f"{k}: {v:.3f}" for k, v in c.rejection.items())
        print(f"N={c.n_units:4d} T={c.n_periods:4d} delta={c.delta:.2f}  bias*100={c.beta1_bias_x100: .3f}  "
              f"rmse={c.beta1_rmse:.4f}  g-rmse={c.g_median_rmse:.4f}  {rej}")
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def _data_flags(p):
    p.add_argument("--input", required=True, help="long-format CSV file")
    p.add_argument("--unit", default="unit")
    p.add_argument("--time", default="time")
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True, help="comma-separated regressor columns")
    p.add_argument("--w", required=True, help="comma-separated conditioning columns")
    p.add_argument("--time-only", default="", help="x columns that only vary over time")
    p.add_argument("--bandwidth", type=_bandwidth, default=None, help="auto | h1,h2,...")
    p.add_argument("--test-bandwidth", type=_bandwidth, default=None, help="auto | h1,h2,...")
    p.add_argument("--ci-level", type=float, default=0.95)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panelfactor", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None,
                        help="worker threads (0 = auto; falls back to PANELFACTOR_THREADS)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = sub.add_parser("estimate", parents=[common], help="profile least-squares fit")
    _data_flags(p)
    p.add_argument("--bootstrap", type=int, default=199)
    p.add_argument("--comparators", default="", help="naive,cce")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", parents=[common], help="specification test")
    _data_flags(p)
    p.add_argument("--bootstrap", type=int, default=199, help="0 skips the bootstrap p-value")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("gcurve", parents=[common], help="g_hat with pointwise bands")
    _data_flags(p)
    p.add_argument("--bootstrap", type=int, default=199)
    p.add_argument("--ci-method", choices=("bootstrap", "plugin"), default="bootstrap")
    p.add_argument("--points", default=None, help="CSV of evaluation points (w columns)")
    p.set_defaults(func=cmd_gcurve)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo study")
    p.add_argument("--grid", required=True, help="JSON study grid")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = DEFAULT_SEED
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PanelFactorError as exc:  # pragma: no cover - every subclass is one of the above
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
