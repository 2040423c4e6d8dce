"""Balanced panel container and CSV ingestion.

Rows are stored unit-major: the observation of unit ``i`` at period ``t``
(both zero-based) sits at row ``i * T + t``. Per-unit blocks are therefore
contiguous slices, which the specification test and the bootstrap rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    DimensionMismatch,
    DuplicateCell,
    IndexOutOfRange,
    MissingColumn,
    NonFiniteValue,
    TimeVaryingColumnViolation,
    UnbalancedPanel,
)


def _frozen(a, ndim):
    a = np.array(a, dtype=float, copy=True)
    if ndim == 2 and a.ndim == 1:
        a = a[:, None]
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PanelDataset:
    """Balanced N x T panel with response ``y``, regressors ``x`` and covariates ``w``.

    Parameters
    ----------
    n_units, n_periods : int
        Panel dimensions N and T.
    y : array, shape (N*T,)
    x : array, shape (N*T, d_x)
        Regressors of interest. Time-only regressors (constant across units
        within a period) are ordinary columns flagged in ``time_only``.
    w : array, shape (N*T, d_w)
        Conditioning covariates entering the nonparametric part.
    unit_ids, time_ids : sequences of length N and T
    x_names, w_names : column labels
    time_only : tuple of bool, one per x column
    """

    n_units: int
    n_periods: int
    y: np.ndarray
    x: np.ndarray
    w: np.ndarray
    unit_ids: tuple = ()
    time_ids: tuple = ()
    x_names: tuple = ()
    w_names: tuple = ()
    time_only: tuple = ()
    y_name: str = "y"
    _unit_index: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n, t = int(self.n_units), int(self.n_periods)
        if n < 1 or t < 1:
            raise DimensionMismatch("n_units and n_periods must be positive")
        object.__setattr__(self, "n_units", n)
        object.__setattr__(self, "n_periods", t)
        y = _frozen(self.y, 1).ravel()
        y.setflags(write=False)
        x = _frozen(self.x, 2)
        w = _frozen(self.w, 2)
        nt = n * t
        for name, arr in (("y", y), ("x", x), ("w", w)):
            if arr.shape[0] != nt:
                raise DimensionMismatch(f"{name} has {arr.shape[0]} rows, expected N*T = {nt}")
        if x.ndim != 2 or x.shape[1] < 1:
            raise DimensionMismatch("x needs at least one column")
        if w.ndim != 2 or w.shape[1] < 1:
            raise DimensionMismatch("w needs at least one column")
        for name, arr in (("y", y[:, None]), ("x", x), ("w", w)):
            bad = ~np.isfinite(arr)
            if bad.any():
                r, c = np.argwhere(bad)[0]
                raise NonFiniteValue(int(r), f"{name}[{c}]")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)

        defaults = {
            "unit_ids": tuple(range(1, n + 1)),
            "time_ids": tuple(range(1, t + 1)),
            "x_names": tuple(f"x{k + 1}" for k in range(x.shape[1])),
            "w_names": tuple(f"w{k + 1}" for k in range(w.shape[1])),
            "time_only": (False,) * x.shape[1],
        }
        for attr, default in defaults.items():
            value = tuple(getattr(self, attr)) or default
            object.__setattr__(self, attr, value)
        if len(self.unit_ids) != n or len(self.time_ids) != t:
            raise DimensionMismatch("identifier vectors do not match N and T")
        if len(self.x_names) != x.shape[1] or len(self.time_only) != x.shape[1]:
            raise DimensionMismatch("x_names/time_only do not match the x columns")
        if len(self.w_names) != w.shape[1]:
            raise DimensionMismatch("w_names does not match the w columns")

        for k, flag in enumerate(self.time_only):
            if flag:
                block = x[:, k].reshape(n, t)
                if not np.all(block == block[0]):
                    raise TimeVaryingColumnViolation(
                        f"column {self.x_names[k]!r} is flagged time-only but varies across units"
                    )
        unit_index = np.repeat(np.arange(n), t)
        unit_index.setflags(write=False)
        object.__setattr__(self, "_unit_index", unit_index)

    @property
    def n_obs(self) -> int:
        return self.n_units * self.n_periods

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def d_w(self) -> int:
        return self.w.shape[1]

    @property
    def unit_index(self) -> np.ndarray:
        """Zero-based unit number of every row."""
        return self._unit_index

    @property
    def chi(self) -> np.ndarray:
        """Test covariates: x columns followed by w columns."""
        return np.hstack([self.x, self.w])

    def unit_block(self, i: int):
        """Return ``(y_i, x_i, w_i)`` for the 1-based unit index ``i``."""
        if not 1 <= i <= self.n_units:
            raise IndexOutOfRange(f"unit index {i} outside 1..{self.n_units}")
        rows = slice((i - 1) * self.n_periods, i * self.n_periods)
        return self.y[rows], self.x[rows], self.w[rows]

    def with_y(self, y) -> "PanelDataset":
        """Copy of the dataset with a new response vector."""
        return PanelDataset(
            self.n_units, self.n_periods, y, self.x, self.w,
            unit_ids=self.unit_ids, time_ids=self.time_ids, x_names=self.x_names,
            w_names=self.w_names, time_only=self.time_only, y_name=self.y_name,
        )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({
            "unit": np.repeat(np.asarray(self.unit_ids, dtype=object), self.n_periods),
            "time": np.tile(np.asarray(self.time_ids, dtype=object), self.n_units),
            self.y_name: self.y,
        })
        for k, name in enumerate(self.x_names):
            df[name] = self.x[:, k]
        for k, name in enumerate(self.w_names):
            df[name] = self.w[:, k]
        return df

    def to_csv(self, path) -> None:
        # repr formatting gives shortest round-trip decimal strings
        self.to_frame().to_csv(path, index=False)

    def column_map(self) -> "ColumnMap":
        return ColumnMap(
            unit="unit", time="time", y=self.y_name, x=self.x_names, w=self.w_names,
            time_only=tuple(n for n, f in zip(self.x_names, self.time_only) if f),
        )


@dataclass(frozen=True)
class ColumnMap:
    """Which CSV columns play which role."""

    unit: str = "unit"
    time: str = "time"
    y: str = "y"
    x: Sequence[str] = ()
    w: Sequence[str] = ()
    time_only: Sequence[str] = ()


def _plain(v):
    return v.item() if hasattr(v, "item") else v


def _sort_key(values):
    values = [_plain(v) for v in values]
    try:
        return sorted(values)
    except TypeError:
        return sorted(values, key=str)


def load_csv(path, spec: ColumnMap) -> PanelDataset:
    """Read a long-format CSV into a validated :class:`PanelDataset`.

    Units keep their order of first appearance; periods are sorted ascending.
    """
    path = Path(path)
    if not spec.x or not spec.w:
        raise DimensionMismatch("at least one x column and one w column are required")
    df = pd.read_csv(path, float_precision="round_trip", keep_default_na=True)
    numeric = [spec.y, *spec.x, *spec.w]
    for col in (spec.unit, spec.time, *numeric):
        if col not in df.columns:
            raise MissingColumn(f"column {col!r} not found in {path.name}")
    unknown = set(spec.time_only) - set(spec.x)
    if unknown:
        raise MissingColumn(f"time-only columns {sorted(unknown)} are not x columns")

    for col in numeric:
        vals = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            # data row number counted from 1, header excluded
            raise NonFiniteValue(int(bad[0]) + 1, col)
        df[col] = vals

    dup = df.duplicated(subset=[spec.unit, spec.time], keep=False)
    if dup.any():
        first = df.loc[dup, [spec.unit, spec.time]].iloc[0]
        raise DuplicateCell(f"(unit, time) = ({first.iloc[0]}, {first.iloc[1]}) appears more than once")

    units = [_plain(u) for u in pd.unique(df[spec.unit])]
    times = _sort_key(pd.unique(df[spec.time]))
    if len(df) != len(units) * len(times):
        present = set(zip(df[spec.unit], df[spec.time]))
        missing = [(u, t) for u in units for t in times if (u, t) not in present]
        raise UnbalancedPanel(missing)

    order = {u: k for k, u in enumerate(units)}
    torder = {t: k for k, t in enumerate(times)}
    key = df[spec.unit].map(order).to_numpy() * len(times) + df[spec.time].map(torder).to_numpy()
    df = df.iloc[np.argsort(key, kind="stable")]

    return PanelDataset(
        len(units), len(times),
        df[spec.y].to_numpy(),
        df[list(spec.x)].to_numpy(),
        df[list(spec.w)].to_numpy(),
        unit_ids=tuple(units), time_ids=tuple(times),
        x_names=tuple(spec.x), w_names=tuple(spec.w),
        time_only=tuple(c in set(spec.time_only) for c in spec.x),
        y_name=spec.y,
    )
