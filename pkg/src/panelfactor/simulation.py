"""Data-generating process and Monte Carlo harness.

The response follows

    y_it = x_it b1 + z_t b2 + m_it + u_it,   m_it = -w_it^2 + 2 w_it + xi_it,

and under the alternative ``m_it`` gains ``delta * (4 x_it^2 + z_t^3 - 3 w_it)``.
How covariates load on the latent factors is this package's own recipe
(``RECIPE``), printed into every report.

Replication ``r`` of the cell ``(N, T, delta)`` draws its data from the seed
``(seed, N, T, r)``: cells that differ only in ``delta`` share their draws,
which makes power curves smooth in ``delta``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapPlan, Target, run_bootstrap
from .errors import DataError, PanelFactorError, ReplicationFailure
from .estimator import cce_pooled_fit, fit, naive_fit
from .kernels import BandwidthSpec
from .local_linear import LocalLinearSmoother
from .panel_data import PanelDataset
from .spec_test import PairKernel, run_test
from ._parallel import resolve_workers

RECIPE_VERSION = "default-v1"
RECIPE = (
    "lambda_i ~ N(0,1); f_t stationary AR(1), coefficient 0.5, unit innovation variance; "
    "w_it = 0.6 lambda_i + 0.6 f_t + zeta_it, zeta_it ~ N(0, 0.5^2); "
    "x_it = {xw} w_it + nu_it, nu_it ~ N(0,1); z_t = 0.5 f_t + e_t, e_t ~ N(0,1); "
    "xi_it, u_it ~ N(0,1) iid"
)
LEVELS = (0.01, 0.05, 0.10)


@dataclass(frozen=True)
class DgpSpec:
    n_units: int
    n_periods: int
    beta1: float = 1.0
    beta2: float = 1.0
    delta: float = 0.0
    seed: int = 0
    xw_loading: float = 0.5
    noiseless: bool = False

    def __post_init__(self):
        if self.n_units < 1 or self.n_periods < 1:
            raise DataError("panel dimensions must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise DataError("delta must lie in [0, 1]")

    @property
    def recipe(self) -> str:
        return RECIPE.format(xw=self.xw_loading)


@dataclass(frozen=True)
class Truth:
    beta: np.ndarray
    g: np.ndarray
    m0: np.ndarray
    loadings: np.ndarray
    factors: np.ndarray


def generate(spec: DgpSpec, rng: np.random.Generator | None = None):
    """Simulate one panel. Returns ``(dataset, truth)``."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    n, t = spec.n_units, spec.n_periods
    lam = rng.standard_normal(n)
    innov = rng.standard_normal(t)
    f = np.empty(t)
    f[0] = innov[0] / math.sqrt(1 - 0.25)
    for s in range(1, t):
        f[s] = 0.5 * f[s - 1] + innov[s]
    zeta = 0.5 * rng.standard_normal((n, t))
    nu = rng.standard_normal((n, t))
    e_z = rng.standard_normal(t)
    xi = rng.standard_normal((n, t))
    u = rng.standard_normal((n, t))
    if spec.noiseless:
        xi[:] = 0.0
        u[:] = 0.0

    w = 0.6 * lam[:, None] + 0.6 * f[None, :] + zeta
    x = spec.xw_loading * w + nu
    z = np.broadcast_to(0.5 * f + e_z, (n, t))
    g = -w ** 2 + 2 * w
    m0 = g + xi
    if spec.delta:
        m0 = m0 + spec.delta * (4 * x ** 2 + z ** 3 - 3 * w)
    y = spec.beta1 * x + spec.beta2 * z + m0 + u

    ds = PanelDataset(
        n, t, y.ravel(), np.column_stack([x.ravel(), z.ravel()]), w.reshape(-1, 1),
        x_names=("x", "z"), w_names=("w",), time_only=(False, True),
    )
    truth = Truth(np.array([spec.beta1, spec.beta2]), g.ravel(), m0.ravel(), lam, f)
    return ds, truth


@dataclass(frozen=True)
class StudyGrid:
    n_units: tuple = (20,)
    n_periods: tuple = (20,)
    deltas: tuple = (0.0,)
    replications: int = 200
    bootstrap: int = 199
    levels: tuple = LEVELS
    seed: int = 20240601
    test: bool = True
    comparators: tuple = ("naive", "cce")
    xw_loading: float = 0.5

    def __post_init__(self):
        for name in ("n_units", "n_periods", "deltas", "levels", "comparators"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.replications < 2:
            raise DataError("need at least 2 replications")
        if self.bootstrap and self.bootstrap < 19:
            raise DataError("bootstrap must be 0 or at least 19")
        if any(not 0 <= d <= 1 for d in self.deltas):
            raise DataError("deltas must lie in [0, 1]")
        if any(not 0 < a < 1 for a in self.levels):
            raise DataError("levels must lie in (0, 1)")
        unknown = set(self.comparators) - {"naive", "cce"}
        if unknown:
            raise DataError(f"unknown comparators: {sorted(unknown)}")

    @classmethod
    def from_json(cls, path) -> "StudyGrid":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read study grid {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError("study grid must be a JSON object")
        aliases = {"N": "n_units", "T": "n_periods", "delta": "deltas", "R": "replications",
                   "B": "bootstrap"}
        kwargs = {aliases.get(k, k): v for k, v in raw.items()}
        unknown = set(kwargs) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown study grid keys: {sorted(unknown)}")
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise DataError(f"malformed study grid: {exc}") from exc

    def cells(self):
        return [(n, t, d) for n in self.n_units for t in self.n_periods for d in self.deltas]


def _replication_seeds(seed, n, t, r):
    ss = np.random.SeedSequence([int(seed), int(n), int(t), int(r)])
    data_ss, boot_ss = ss.spawn(2)
    return data_ss, int(boot_ss.generate_state(1, np.uint64)[0])


def run_replication(grid: StudyGrid, n: int, t: int, delta: float, r: int) -> dict:
    """One Monte Carlo draw: simulate, fit, compare, test."""
    data_ss, boot_seed = _replication_seeds(grid.seed, n, t, r)
    spec = DgpSpec(n, t, delta=delta, xw_loading=grid.xw_loading)
    out = {"failed": False}
    try:
        ds, truth = generate(spec, np.random.default_rng(data_ss))
        bw = BandwidthSpec.rule_of_thumb(ds)
        smoother = LocalLinearSmoother(ds.w, bw.h_est)
        res = fit(ds, bw, smoother=smoother)
        err = res.g_hat_at_sample - truth.g
        out.update(beta1=float(res.beta_hat[0]), beta2=float(res.beta_hat[1]),
                   g_bias=float(err.mean()), g_rmse=float(np.sqrt(np.mean(err ** 2))))
        if "naive" in grid.comparators:
            out["naive_beta1"] = float(naive_fit(ds).beta_hat[0])
        if "cce" in grid.comparators:
            out["cce_beta1"] = float(cce_pooled_fit(ds, drop_time_only_averages=True).beta_hat[0])
        if grid.test:
            pk = PairKernel(ds.chi, bw.h_test, n, t)
            test = run_test(ds, bw, res, pair_kernel=pk)
            out.update(standardized=test.standardized, p_asymptotic=test.p_asymptotic)
            if grid.bootstrap:
                plan = BootstrapPlan(grid.bootstrap, boot_seed, targets=frozenset({Target.TEST_PVALUE}))
                rep = run_bootstrap(ds, bw, res, plan, smoother=smoother, pair_kernel=pk,
                                    observed=test.standardized)
                out["p_bootstrap"] = rep.test_pvalue
    except PanelFactorError as exc:
        out = {"failed": True, "error": f"{type(exc).__name__}: {exc}"}
    return out


def _run_items(args):
    grid, items = args
    return [run_replication(grid, *item) for item in items]


@dataclass
class CellSummary:
    n_units: int
    n_periods: int
    delta: float
    n_replications: int
    n_failed: int
    beta1_bias_x100: float
    beta1_rmse: float
    g_median_bias: float
    g_median_rmse: float
    rejection: dict = field(default_factory=dict)
    pvalue_source: str = "none"
    stat_mean: float = float("nan")
    stat_sd: float = float("nan")
    naive_bias_x100: float = float("nan")
    naive_rmse: float = float("nan")
    cce_bias_x100: float = float("nan")
    cce_rmse: float = float("nan")


@dataclass
class MonteCarloReport:
    cells: list
    n_replications: int
    seed: int
    bootstrap: int
    levels: tuple
    recipe: str
    recipe_version: str = RECIPE_VERSION

    def cell(self, n, t, delta=0.0) -> CellSummary:
        for c in self.cells:
            if c.n_units == n and c.n_periods == t and math.isclose(c.delta, delta):
                return c
        raise KeyError((n, t, delta))

    def to_dict(self) -> dict:
        return {
            "recipe_version": self.recipe_version, "recipe": self.recipe,
            "n_replications": self.n_replications, "seed": self.seed, "bootstrap": self.bootstrap,
            "levels": list(self.levels), "cells": [asdict(c) for c in self.cells],
        }


def _bias_rmse(values, truth):
    err = np.asarray(values) - truth
    return 100 * float(err.mean()), float(np.sqrt(np.mean(err ** 2)))


def summarise(grid: StudyGrid, n, t, delta, draws) -> CellSummary:
    ok = [d for d in draws if not d["failed"]]
    failed = len(draws) - len(ok)
    if failed > 0.05 * len(draws):
        raise ReplicationFailure(f"cell N={n}, T={t}, delta={delta}", failed, len(draws))
    col = lambda key: np.array([d[key] for d in ok if key in d])  # noqa: E731
    bias, rmse = _bias_rmse(col("beta1"), 1.0)
    summary = CellSummary(n, t, delta, len(draws), failed, bias, rmse,
                          float(np.median(col("g_bias"))), float(np.median(col("g_rmse"))))
    if "naive" in grid.comparators:
        summary.naive_bias_x100, summary.naive_rmse = _bias_rmse(col("naive_beta1"), 1.0)
    if "cce" in grid.comparators:
        summary.cce_bias_x100, summary.cce_rmse = _bias_rmse(col("cce_beta1"), 1.0)
    if grid.test:
        z = col("standardized")
        summary.stat_mean, summary.stat_sd = float(z.mean()), float(z.std(ddof=1))
        source = "p_bootstrap" if grid.bootstrap else "p_asymptotic"
        p = col(source)
        summary.pvalue_source = "bootstrap" if grid.bootstrap else "asymptotic"
        summary.rejection = {f"{a:g}": float(np.mean(p <= a)) for a in grid.levels}
    return summary


def run_study(grid: StudyGrid, workers: int | None = 1) -> MonteCarloReport:
    """Run every cell of ``grid`` and summarise; parallel over replications."""
    items = [(n, t, d, r) for (n, t, d) in grid.cells() for r in range(grid.replications)]
    workers = resolve_workers(workers)
    if workers == 1:
        results = [run_replication(grid, *item) for item in items]
    else:
        size = max(1, math.ceil(len(items) / (4 * workers)))
        batches = [(grid, items[k:k + size]) for k in range(0, len(items), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [res for chunk in pool.map(_run_items, batches) for res in chunk]
    cells = []
    R = grid.replications
    for k, (n, t, d) in enumerate(grid.cells()):
        cells.append(summarise(grid, n, t, d, results[k * R:(k + 1) * R]))
    recipe = DgpSpec(1, 1, xw_loading=grid.xw_loading).recipe
    return MonteCarloReport(cells, R, grid.seed, grid.bootstrap, grid.levels, recipe)


def write_report(report: MonteCarloReport, out_dir) -> dict:
    """Write the four CSV tables and ``report.json``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = [f"{a:g}" for a in report.levels]
    paths = {}

    def dump(name, header, rows):
        path = out / name
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        paths[name] = path

    dump("table_beta.csv",
         ["N", "T", "delta", "bias_x100", "rmse", "naive_bias_x100", "naive_rmse",
          "cce_bias_x100", "cce_rmse", "n_replications", "n_failed"],
         [[c.n_units, c.n_periods, c.delta, c.beta1_bias_x100, c.beta1_rmse, c.naive_bias_x100,
           c.naive_rmse, c.cce_bias_x100, c.cce_rmse, c.n_replications, c.n_failed] for c in report.cells])
    dump("table_g.csv", ["N", "T", "delta", "median_bias", "median_rmse"],
         [[c.n_units, c.n_periods, c.delta, c.g_median_bias, c.g_median_rmse] for c in report.cells])
    dump("table_size.csv", ["N", "T", *(f"reject_{a}" for a in levels), "pvalue_source"],
         [[c.n_units, c.n_periods, *(c.rejection.get(a, "") for a in levels), c.pvalue_source]
          for c in report.cells if c.delta == 0])
    dump("power_curve.csv", ["N", "T", "delta", "level", "rejection_rate"],
         [[c.n_units, c.n_periods, c.delta, a, c.rejection.get(a, "")]
          for c in report.cells for a in levels])
    path = out / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    paths["report.json"] = path
    return paths

