"""Profile least-squares estimation of the slope and the nonparametric part.

Steps: residualise y and x on w with the local-linear smoother, regress the
residualised y on the residualised x, then smooth ``y - x'beta`` to recover g.
Standard errors use the sandwich with scores summed within units.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConstantRegressor, DataError, GridOutsideHull, SingularDesign
from .kernels import NU0, BandwidthSpec
from .local_linear import LocalLinearSmoother, residualize

# Relative singular-value threshold below which a design is treated as singular.
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class FitResult:
    """Result of :func:`fit`.

    ``x_tilde`` is kept because the bootstrap reuses it: x and w are held
    fixed across bootstrap samples, so ``(I - S) x`` never changes.
    """

    beta_hat: np.ndarray
    vcov_beta: np.ndarray
    g_hat_at_sample: np.ndarray
    residuals: np.ndarray
    omega_x_hat: np.ndarray
    bandwidths: BandwidthSpec
    x_tilde: np.ndarray = field(repr=False)
    x_names: tuple = ()
    n_units: int = 0
    n_periods: int = 0
    _xb: np.ndarray = field(default=None, repr=False)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov_beta), 0.0, None))

    @property
    def fitted_null(self) -> np.ndarray:
        """x'beta_hat + g_hat at the sample points (y minus residuals)."""
        return self.g_hat_at_sample + self._xb

    def coefficient_table(self) -> list[dict]:
        se = self.std_errors
        rows = []
        for k, name in enumerate(self.x_names):
            t = self.beta_hat[k] / se[k] if se[k] > 0 else float("nan")
            p = float(2 * stats.norm.sf(abs(t))) if np.isfinite(t) else float("nan")
            rows.append({"name": name, "estimate": float(self.beta_hat[k]), "std_error": float(se[k]),
                         "t_ratio": float(t), "p_value": p})
        return rows


@dataclass(frozen=True)
class LinearFit:
    """Pooled least-squares comparator. ``beta_hat``/``vcov_beta`` cover the x block only."""

    method: str
    beta_hat: np.ndarray
    vcov_beta: np.ndarray
    coefficients: np.ndarray
    coef_names: tuple
    residuals: np.ndarray
    x_names: tuple = ()

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov_beta), 0.0, None))


def cluster_sandwich(design, resid, unit_index, n_units):
    """(D'D)^{-1} [sum_i s_i s_i'] (D'D)^{-1} with s_i the within-unit score sum."""
    bread = np.linalg.inv(design.T @ design)
    scores = np.zeros((n_units, design.shape[1]))
    np.add.at(scores, unit_index, design * resid[:, None])
    meat = scores.T @ scores
    vcov = bread @ meat @ bread
    return (vcov + vcov.T) / 2


def _check_rank(design, what):
    norms = np.linalg.norm(design, axis=0)
    if np.any(norms == 0):
        raise SingularDesign(f"{what}: a column is identically zero")
    sv = np.linalg.svd(design / norms, compute_uv=False)
    if sv[-1] < _RANK_TOL * sv[0]:
        raise SingularDesign(f"{what}: columns are (nearly) collinear")


def _check_regressors(ds):
    for k in range(ds.d_x):
        if np.std(ds.x[:, k]) < 1e-12:
            raise ConstantRegressor(
                f"x column {ds.x_names[k]!r} is constant; the intercept is absorbed into g(w)"
            )


def fit(ds, bw: BandwidthSpec | None = None, workers: int | None = 1,
        smoother: LocalLinearSmoother | None = None) -> FitResult:
    """Profile least-squares fit of ``y = x'beta + g(w) + e``."""
    _check_regressors(ds)
    if bw is None:
        bw = BandwidthSpec.rule_of_thumb(ds)
    if ds.n_obs <= ds.d_x + ds.d_w + 1:
        raise DataError("too few observations for the number of regressors")
    if bw.h_est.size != ds.d_w:
        raise DataError(f"need {ds.d_w} estimation bandwidths, got {bw.h_est.size}")
    smoother = smoother or LocalLinearSmoother(ds.w, bw.h_est, workers)
    res = residualize(ds, bw.h_est, smoother=smoother)
    xt, yt = res.x_tilde, res.y_tilde

    centred = np.linalg.norm(ds.x - ds.x.mean(axis=0), axis=0)
    lost = np.linalg.norm(xt, axis=0) < 1e-8 * centred
    if lost.any():
        name = ds.x_names[int(np.argmax(lost))]
        raise SingularDesign(f"x column {name!r} is (almost) an exact function of w")
    _check_rank(xt, "residualised regressors")

    beta, *_ = np.linalg.lstsq(xt, yt, rcond=None)
    resid = yt - xt @ beta
    xb = ds.x @ beta
    # S(y - X b) = y_fitted - x_fitted b, and e = (I - S)(y - X b)
    g_hat = res.y_fitted - res.x_fitted @ beta
    vcov = cluster_sandwich(xt, resid, ds.unit_index, ds.n_units)
    omega = xt.T @ xt / ds.n_obs
    return FitResult(
        beta_hat=beta, vcov_beta=vcov, g_hat_at_sample=g_hat, residuals=resid,
        omega_x_hat=(omega + omega.T) / 2, bandwidths=bw, x_tilde=xt,
        x_names=ds.x_names, n_units=ds.n_units, n_periods=ds.n_periods, _xb=xb,
    )


def _pooled(ds, design, names, k_x, method):
    _check_rank(design, method)
    coef, *_ = np.linalg.lstsq(design, ds.y, rcond=None)
    resid = ds.y - design @ coef
    vcov = cluster_sandwich(design, resid, ds.unit_index, ds.n_units)
    sl = slice(1, 1 + k_x)
    return LinearFit(method, coef[sl], vcov[sl, sl], coef, tuple(names), resid, ds.x_names)


def naive_fit(ds) -> LinearFit:
    """Pooled OLS of y on an intercept and x, ignoring w."""
    design = np.column_stack([np.ones(ds.n_obs), ds.x])
    return _pooled(ds, design, ("const", *ds.x_names), ds.d_x, "naive pooled OLS")


def cross_section_means(values, n_units, n_periods):
    """Per-period averages over units, replicated back onto every row."""
    values = np.asarray(values, dtype=float)
    shaped = values.reshape(n_units, n_periods, -1)
    means = shaped.mean(axis=0)
    return np.tile(means, (n_units, 1)).reshape(values.shape)


def cce_pooled_fit(ds, drop_time_only_averages: bool = False) -> LinearFit:
    """Pooled common-correlated-effects regression.

    y is regressed on ``[1, x, ybar_t, xbar_t]`` where the bars are
    cross-sectional averages. A time-only regressor equals its own average, so
    by default its presence is reported as a singular design; with
    ``drop_time_only_averages`` the offending averages are left out instead.
    """
    if ds.n_units < ds.d_x + 2:
        raise DataError(f"CCE needs at least d_x + 2 = {ds.d_x + 2} units")
    n, t = ds.n_units, ds.n_periods
    xbar = cross_section_means(ds.x, n, t)
    time_only = np.array([
        flag or np.all(ds.x[:, k].reshape(n, t) == ds.x[:t, k]) for k, flag in enumerate(ds.time_only)
    ])
    if time_only.any() and not drop_time_only_averages:
        names = [ds.x_names[k] for k in np.flatnonzero(time_only)]
        raise SingularDesign(
            f"CCE: regressor(s) {names} do not vary across units and coincide with their own "
            "cross-sectional average; individual-invariant regressors are not identified"
        )
    keep = ~time_only
    ybar = cross_section_means(ds.y, n, t)
    design = np.column_stack([np.ones(ds.n_obs), ds.x, ybar, xbar[:, keep]])
    names = ("const", *ds.x_names, f"mean_{ds.y_name}",
             *(f"mean_{nm}" for nm, k in zip(ds.x_names, keep) if k))
    return _pooled(ds, design, names, ds.d_x, "pooled CCE")


class CurveMethod(str, enum.Enum):
    BOOTSTRAP = "BootstrapPercentile"
    PLUG_IN = "PlugIn"


@dataclass(frozen=True)
class GCurve:
    grid: np.ndarray
    g_hat: np.ndarray
    se_pointwise: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    method: CurveMethod
    level: float


def check_hull(grid, w):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[1] != w.shape[1]:
        raise DataError(f"grid has {grid.shape[1]} columns, w has {w.shape[1]}")
    lo, hi = w.min(axis=0), w.max(axis=0)
    outside = np.any((grid < lo) | (grid > hi), axis=1)
    if outside.any():
        k = int(np.argmax(outside))
        raise GridOutsideHull(f"grid point {grid[k].tolist()} lies outside the observed range of w")
    return grid


def default_grid(w, n_points: int = 41) -> np.ndarray:
    """Quantile sweep of each w coordinate, the others held at their medians."""
    w = np.asarray(w, dtype=float)
    probs = np.linspace(0.05, 0.95, n_points)
    med = np.median(w, axis=0)
    blocks = []
    for k in range(w.shape[1]):
        block = np.tile(med, (n_points, 1))
        block[:, k] = np.quantile(w[:, k], probs)
        blocks.append(block)
    return np.vstack(blocks)


def plug_in_variance(grid, w, resid, h, unit_index, n_units):
    """Pointwise variance of g_hat from the kernel density and a within-unit Psi.

    rho(w) = sum_it K_it / (NT prod h) and
    Psi(w) = sum_i (sum_t K_it e_it)^2 / (NT prod h nu0^d_w rho(w)),
    giving var = nu0^d_w Psi / (NT prod h rho).
    """
    n_obs = len(resid)
    hprod = float(np.prod(h))
    out = np.empty(len(grid))
    for g, point in enumerate(grid):
        kw = np.prod(0.75 * np.maximum(1 - ((w - point) / h) ** 2, 0), axis=1)
        rho = kw.sum() / (n_obs * hprod)
        if rho <= 0:
            out[g] = np.nan
            continue
        per_unit = np.bincount(unit_index, weights=kw * resid, minlength=n_units)
        psi = (per_unit ** 2).sum() / (n_obs * hprod * NU0 ** w.shape[1] * rho)
        out[g] = NU0 ** w.shape[1] * psi / (n_obs * hprod * rho)
    return out


def g_curve(fit_result: FitResult, ds, grid=None, method="bootstrap", level: float = 0.95,
            n_boot: int = 199, seed: int = 20240601, workers: int | None = 1) -> GCurve:
    """g_hat on a grid with pointwise uncertainty bands."""
    if not 0 < level < 1:
        raise DataError("level must lie in (0, 1)")
    method = {"bootstrap": CurveMethod.BOOTSTRAP, "plugin": CurveMethod.PLUG_IN,
              "plug-in": CurveMethod.PLUG_IN}.get(method, method)
    method = CurveMethod(method)
    grid = default_grid(ds.w) if grid is None else check_hull(grid, ds.w)
    h = fit_result.bandwidths.h_est
    smoother = LocalLinearSmoother(ds.w, h, workers)
    g_hat = smoother.at(grid, ds.y - ds.x @ fit_result.beta_hat)
    if method is CurveMethod.PLUG_IN:
        var = plug_in_variance(grid, ds.w, fit_result.residuals, h, ds.unit_index, ds.n_units)
        se = np.sqrt(var)
        z = stats.norm.ppf(0.5 + level / 2)
        return GCurve(grid, g_hat, se, g_hat - z * se, g_hat + z * se, method, level)

    from .bootstrap import BootstrapPlan, Target, run_bootstrap

    plan = BootstrapPlan(n_replications=n_boot, seed=seed, targets=frozenset({Target.G_BANDS}))
    report = run_bootstrap(ds, fit_result.bandwidths, fit_result, plan, grid=grid, level=level,
                           workers=workers, smoother=smoother)
    half = (report.g_band_hi - report.g_band_lo) / 2
    return GCurve(grid, g_hat, half, report.g_band_lo, report.g_band_hi, method, level)
