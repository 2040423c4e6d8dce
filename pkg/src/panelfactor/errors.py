"""Exception hierarchy.

Input problems derive from :class:`DataError`, numerical breakdowns from
:class:`NumericalError`. The CLI maps the two families onto exit codes 2 and 3.
"""


class PanelFactorError(Exception):
    """Base class for every error raised by this package."""


class DataError(PanelFactorError, ValueError):
    """The input data or arguments violate a precondition."""


class NumericalError(PanelFactorError, ArithmeticError):
    """A computation could not be carried out reliably."""


class MissingColumn(DataError):
    pass


class UnbalancedPanel(DataError):
    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(f"({u}, {t})" for u, t in self.missing[:20])
        more = "" if len(self.missing) <= 20 else f" ... ({len(self.missing)} total)"
        super().__init__(f"unbalanced panel; missing (unit, time) cells: {shown}{more}")


class DuplicateCell(DataError):
    pass


class NonFiniteValue(DataError):
    def __init__(self, row, column):
        self.row = row
        self.column = column
        super().__init__(f"non-finite value in row {row}, column {column!r}")


class TimeVaryingColumnViolation(DataError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class DimensionMismatch(DataError):
    pass


class DegenerateScale(DataError):
    """A covariate has zero sample spread, so no scale-based bandwidth exists."""


class ConstantRegressor(DataError):
    """A regressor is (numerically) constant; the intercept belongs to g."""


class GridOutsideHull(DataError):
    pass


class InsufficientLocalData(NumericalError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message if row is None else f"{message} (evaluation row {row})")


class SingularDesign(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class ReplicationFailure(NumericalError):
    """Too many resampling or Monte Carlo replications failed."""

    def __init__(self, message, n_failed, n_total):
        self.n_failed = n_failed
        self.n_total = n_total
        super().__init__(f"{message}: {n_failed} of {n_total} replications failed")
