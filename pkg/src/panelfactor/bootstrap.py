"""Wild bootstrap with one Gaussian multiplier per unit.

Bootstrap responses are built under the null model,

    y*_it = x_it' beta_hat + g_hat(w_it) + e_it * theta_i,

so all periods of a unit share ``theta_i`` and within-unit dependence of the
residuals carries over. Regressors and bandwidths stay fixed, which makes the
smoother and the pair kernel identical for every replication: replications are
therefore processed in batches of columns through a single smoother pass
instead of one refit at a time. The arithmetic per replication is the full
pipeline (residualise, slope, g, residuals, test statistic).
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ReplicationFailure
from .local_linear import LocalLinearSmoother

# Replications per batch. Fixed so the output does not depend on worker count.
_BATCH = 64
MAX_FAILURE_SHARE = 0.05


class Target(str, enum.Enum):
    BETA_MOMENTS = "BetaMoments"
    G_BANDS = "GBands"
    TEST_PVALUE = "TestPValue"


@dataclass(frozen=True)
class BootstrapPlan:
    n_replications: int
    seed: int = 20240601
    multiplier: str = "StandardNormal"
    targets: frozenset = frozenset({Target.BETA_MOMENTS, Target.TEST_PVALUE})

    def __post_init__(self):
        if self.multiplier != "StandardNormal":
            raise DataError("only standard normal multipliers are supported")
        targets = frozenset(Target(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DataError("seed must be an unsigned 64-bit integer")
        if self.n_replications < 2:
            raise DataError("at least 2 bootstrap replications are required")
        if Target.TEST_PVALUE in targets:
            if self.n_replications < 19:
                raise DataError("bootstrap p-values need at least 19 replications")
            if self.n_replications < 199:
                warnings.warn("fewer than 199 replications give a coarse bootstrap p-value",
                              RuntimeWarning, stacklevel=3)


@dataclass(frozen=True)
class BootstrapReport:
    n_replications: int
    seed: int
    beta_bias: np.ndarray | None = None
    beta_sd: np.ndarray | None = None
    beta_draws: np.ndarray | None = field(default=None, repr=False)
    grid: np.ndarray | None = field(default=None, repr=False)
    g_band_lo: np.ndarray | None = None
    g_band_hi: np.ndarray | None = None
    test_pvalue: float | None = None
    observed_statistic: float | None = None
    replication_statistics: np.ndarray | None = field(default=None, repr=False)
    n_failed: int = 0


def multipliers(seed: int, b: int, n_units: int) -> np.ndarray:
    """Unit multipliers of replication ``b``; depends only on ``(seed, b)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(b),))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(n_units)


def make_bootstrap_sample(fit, ds, theta) -> np.ndarray:
    """Null-model bootstrap response for unit multipliers ``theta`` (length N).

    ``theta`` may also be an (N, B) array, giving B samples as columns.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] != ds.n_units:
        raise DataError(f"need one multiplier per unit ({ds.n_units}), got {theta.shape[0]}")
    spread = theta[ds.unit_index]
    if spread.ndim == 1:
        return fit.fitted_null + fit.residuals * spread
    return fit.fitted_null[:, None] + fit.residuals[:, None] * spread


def bootstrap_pvalue(observed: float, draws) -> float:
    """(1 + #{draws >= observed}) / (B + 1)."""
    draws = np.asarray(draws, dtype=float)
    return float((1 + np.count_nonzero(draws >= observed)) / (draws.size + 1))


def run_bootstrap(ds, bw, fit, plan: BootstrapPlan, grid=None, level: float = 0.95,
                  workers: int | None = 1, smoother: LocalLinearSmoother | None = None,
                  pair_kernel=None, observed: float | None = None) -> BootstrapReport:
    """Run ``plan.n_replications`` wild-bootstrap replications of the full fit.

    Replications whose test statistic is undefined (zero variance estimate) are
    excluded from the p-value; more than 5% of them is an error.
    """
    from .spec_test import PairKernel, exact_fit, run_test

    B = plan.n_replications
    want_beta = Target.BETA_MOMENTS in plan.targets
    want_g = Target.G_BANDS in plan.targets
    want_test = Target.TEST_PVALUE in plan.targets
    smoother = smoother or LocalLinearSmoother(ds.w, bw.h_est, workers)

    xt = fit.x_tilde
    x_fitted = ds.x - xt
    gram = xt.T @ xt
    if want_g:
        from .estimator import check_hull, default_grid

        grid = default_grid(ds.w) if grid is None else check_hull(grid, ds.w)
        grid_x = smoother.at(grid, ds.x)
    if want_test:
        pair_kernel = pair_kernel or PairKernel(ds.chi, bw.h_test, ds.n_units, ds.n_periods, workers)
        if observed is None:
            observed = run_test(ds, bw, fit, pair_kernel=pair_kernel).standardized

    betas, g_draws, stats_ = [], [], []
    for start in range(0, B, _BATCH):
        ids = range(start, min(start + _BATCH, B))
        theta = np.column_stack([multipliers(plan.seed, b, ds.n_units) for b in ids])
        ystar = make_bootstrap_sample(fit, ds, theta)
        y_fit = smoother.apply(ystar)
        beta = np.linalg.solve(gram, xt.T @ (ystar - y_fit))
        betas.append(beta.T)
        if want_g:
            g_draws.append((smoother.at(grid, ystar) - grid_x @ beta).T)
        if want_test:
            resid = (ystar - y_fit) - xt @ beta
            z = pair_kernel.standardized(resid)
            z[exact_fit(resid, ystar)] = np.nan
            stats_.append(z)

    betas = np.vstack(betas)
    report = dict(n_replications=B, seed=int(plan.seed))
    if want_beta:
        report.update(beta_bias=betas.mean(axis=0) - fit.beta_hat,
                      beta_sd=betas.std(axis=0, ddof=1), beta_draws=betas)
    if want_g:
        draws = np.vstack(g_draws)
        alpha = (1 - level) / 2
        report.update(grid=grid, g_band_lo=np.quantile(draws, alpha, axis=0),
                      g_band_hi=np.quantile(draws, 1 - alpha, axis=0))
    if want_test:
        z = np.concatenate(stats_)
        failed = int(np.count_nonzero(~np.isfinite(z)))
        if failed > MAX_FAILURE_SHARE * B:
            raise ReplicationFailure("bootstrap test statistic undefined (zero variance)", failed, B)
        good = z[np.isfinite(z)]
        report.update(test_pvalue=bootstrap_pvalue(observed, good), observed_statistic=float(observed),
                      replication_statistics=z, n_failed=failed)
    return BootstrapReport(**report)
