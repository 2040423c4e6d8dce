"""Pooled local-linear regression on the covariates w.

The smoother matrix S maps a column of targets to its local-linear fitted
values at the sample points. It is never materialised in full: evaluation
points are processed in chunks, and for each chunk only the rows of S that
are needed are formed and multiplied into every target column at once.

Kernel weights are the unnormalised product kernel ``prod_l k(u_l / h_l)``;
the ``1/h`` factors cancel in the weighted least-squares solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientLocalData
from .kernels import SUPPORT, epanechnikov
from ._parallel import pmap

#: Relative eigenvalue floor of the local normal matrix (fraction of its trace).
RIDGE_FLOOR = 1e-10
# Upper bound on doubles held by one chunk's (points x window x terms) arrays.
_CHUNK_BUDGET = 1 << 22


@dataclass(frozen=True)
class LocalFit:
    a: float
    b: np.ndarray
    effective_n: float


def _as_2d(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be one- or two-dimensional")
    return a


def _slope_eye(p):
    eye = np.eye(p)
    eye[0, 0] = 0.0
    return eye


def _solve_local(A, rows):
    """First row of A^{-1} for a stack of local normal matrices.

    Matrices whose smallest eigenvalue falls below ``RIDGE_FLOOR * trace`` get
    that floor added to the slope part of the diagonal; this only happens where
    the local design is (nearly) rank deficient, e.g. an isolated point at the
    edge of the data. Leaving the intercept entry alone keeps constants exact.
    """
    p = A.shape[-1]
    mass = A[:, 0, 0]
    empty = ~(mass > 0)
    if empty.any():
        raise InsufficientLocalData("no observations inside the kernel window", int(rows[np.argmax(empty)]))
    trace = np.trace(A, axis1=1, axis2=2)
    floor = RIDGE_FLOOR * trace
    if p > 1:
        lam_min = np.linalg.eigvalsh(A)[:, 0]
        weak = lam_min < floor
        if weak.any():
            A = A.copy()
            A[weak] += floor[weak, None, None] * _slope_eye(p)
    e0 = np.zeros((A.shape[0], p, 1))
    e0[:, 0, 0] = 1.0
    sel = np.linalg.solve(A, e0)[..., 0]
    if not np.all(np.isfinite(sel)):
        bad = np.flatnonzero(~np.all(np.isfinite(sel), axis=1))[0]
        raise InsufficientLocalData("local normal matrix is singular", int(rows[bad]))
    return sel


class LocalLinearSmoother:
    """Local-linear smoother over fixed covariates ``w`` and bandwidths ``h``.

    Parameters
    ----------
    w : array, shape (n, d_w)
    h : array, shape (d_w,)
    workers : int
        Thread count for the chunk loop. Chunking does not depend on it, so
        results are identical for any value.
    """

    def __init__(self, w, h, workers: int | None = 1):
        self.w = _as_2d(w, "w")
        self.h = np.atleast_1d(np.asarray(h, dtype=float))
        if self.h.shape != (self.w.shape[1],):
            raise DimensionMismatch(f"need {self.w.shape[1]} bandwidths, got {self.h.size}")
        if np.any(self.h <= 0):
            raise DimensionMismatch("bandwidths must be strictly positive")
        self.workers = workers
        self._order = np.argsort(self.w[:, 0], kind="stable")
        self._w_sorted = self.w[self._order]
        self._key = self._w_sorted[:, 0]

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def _chunks(self, points):
        order = np.argsort(points[:, 0], kind="stable")
        p = self.w.shape[1] + 1
        size = max(1, min(len(points), _CHUNK_BUDGET // (self.n * (p + 1))))
        return [order[k:k + size] for k in range(0, len(points), size)]

    def _window(self, first_coords):
        # rows whose first coordinate can carry positive weight
        reach = SUPPORT * self.h[0]
        lo = np.searchsorted(self._key, first_coords.min() - reach, side="right")
        hi = np.searchsorted(self._key, first_coords.max() + reach, side="left")
        return lo, hi

    def _rows(self, points, idx):
        """Rows ``idx`` of the smoother at ``points`` over the sorted window."""
        pts = points[idx]
        lo, hi = self._window(pts[:, 0])
        ws = self._w_sorted[lo:hi]
        dev = ws[None, :, :] - pts[:, None, :]
        kw = np.prod(epanechnikov(dev / self.h), axis=-1)
        z = np.concatenate([np.ones(dev.shape[:2] + (1,)), dev], axis=-1)
        kz = kw[..., None] * z
        A = np.matmul(kz.transpose(0, 2, 1), z)
        sel = _solve_local(A, idx)
        rows = np.matmul(kz, sel[..., None])[..., 0]
        return rows, self._order[lo:hi]

    def at(self, points, targets):
        """Fitted values ``(S_points @ targets)``, shape (n_points, k)."""
        points = _as_2d(points, "points")
        if points.shape[1] != self.w.shape[1]:
            raise DimensionMismatch("evaluation points and w differ in dimension")
        squeeze = np.ndim(targets) == 1
        C = _as_2d(targets, "targets")
        if C.shape[0] != self.n:
            raise DimensionMismatch(f"targets have {C.shape[0]} rows, expected {self.n}")

        def work(idx):
            rows, cols = self._rows(points, idx)
            return rows @ C[cols]

        chunks = self._chunks(points)
        out = np.empty((len(points), C.shape[1]))
        for idx, block in zip(chunks, pmap(work, chunks, self.workers)):
            out[idx] = block
        return out[:, 0] if squeeze else out

    def apply(self, targets):
        """``S @ targets`` at the sample points."""
        return self.at(self.w, targets)

    def matrix(self, points=None):
        """Dense rows of S at ``points`` (default: sample points). Small n only."""
        points = self.w if points is None else _as_2d(points, "points")
        out = np.zeros((len(points), self.n))
        for idx in self._chunks(points):
            rows, cols = self._rows(points, idx)
            block = np.zeros((len(idx), self.n))
            block[:, cols] = rows
            out[idx] = block
        return out


def fit_at_point(w0, w, target, h) -> LocalFit:
    """Weighted least-squares fit of ``target`` on ``[1, w - w0]`` around ``w0``."""
    w = _as_2d(w, "w")
    w0 = np.atleast_1d(np.asarray(w0, dtype=float))
    target = np.asarray(target, dtype=float).ravel()
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if w0.shape != (w.shape[1],) or h.shape != (w.shape[1],) or target.shape != (w.shape[0],):
        raise DimensionMismatch("inconsistent dimensions in fit_at_point")
    dev = w - w0
    kw = np.prod(epanechnikov(dev / h), axis=-1)
    z = np.hstack([np.ones((len(w), 1)), dev])
    A = (z * kw[:, None]).T @ z
    rhs = (z * kw[:, None]).T @ target
    if not kw.sum() > 0:
        raise InsufficientLocalData("no observations inside the kernel window")
    floor = RIDGE_FLOOR * np.trace(A)
    if np.linalg.eigvalsh(A)[0] < floor:
        A = A + floor * _slope_eye(len(A))
    coef = np.linalg.solve(A, rhs)
    return LocalFit(a=float(coef[0]), b=coef[1:], effective_n=float(kw.sum()))


@dataclass(frozen=True)
class Residualized:
    """Output of :func:`residualize`: tilde = column - S @ column."""

    y_tilde: np.ndarray
    x_tilde: np.ndarray
    y_fitted: np.ndarray
    x_fitted: np.ndarray


def residualize(ds, h, workers: int | None = 1, smoother: LocalLinearSmoother | None = None) -> Residualized:
    """Apply ``I - S`` to y and every column of x in a single smoother pass."""
    smoother = smoother or LocalLinearSmoother(ds.w, h, workers)
    fitted = smoother.apply(np.column_stack([ds.y, ds.x]))
    tilde = np.column_stack([ds.y, ds.x]) - fitted
    return Residualized(tilde[:, 0], tilde[:, 1:], fitted[:, 0], fitted[:, 1:])
