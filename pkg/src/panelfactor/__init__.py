"""Semiparametric panel models with an unspecified factor structure.

Profile least-squares estimation of ``y_it = x_it' beta + g(w_it) + e_it``,
a kernel specification test of the conditional-mean restriction behind it,
a per-unit wild bootstrap, and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .bootstrap import BootstrapPlan, BootstrapReport, Target, make_bootstrap_sample, run_bootstrap
from .errors import (
    ConstantRegressor,
    DataError,
    DegenerateScale,
    DimensionMismatch,
    DuplicateCell,
    GridOutsideHull,
    IndexOutOfRange,
    InsufficientLocalData,
    MissingColumn,
    NonFiniteValue,
    NumericalError,
    PanelFactorError,
    ReplicationFailure,
    SingularDesign,
    TimeVaryingColumnViolation,
    UnbalancedPanel,
    ZeroVariance,
)
from .estimator import FitResult, GCurve, LinearFit, cce_pooled_fit, fit, g_curve, naive_fit
from .kernels import (
    BandwidthSpec,
    default_test_bandwidth,
    epanechnikov,
    product_kernel,
    silverman_bandwidth,
)
from .local_linear import LocalFit, LocalLinearSmoother, fit_at_point, residualize
from .panel_data import ColumnMap, PanelDataset, load_csv
from .simulation import DgpSpec, MonteCarloReport, StudyGrid, generate, run_study, write_report
from .spec_test import SpecTestResult, compute_vnt, run_test
