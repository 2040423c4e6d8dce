"""Epanechnikov kernel, product kernels and rule-of-thumb bandwidths."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateScale, DimensionMismatch

#: Half-width of the kernel support; weights vanish for ``|u| >= SUPPORT``.
SUPPORT = 1.0
#: Squared-kernel integral of the Epanechnikov kernel, int k(u)^2 du.
NU0 = 0.6
#: Second moment of the Epanechnikov kernel, int u^2 k(u) du.
MU2 = 0.2
SILVERMAN_CONSTANT = 2.345


def epanechnikov(u):
    """k(u) = 0.75 (1 - u^2) on |u| <= 1, zero outside. Works elementwise."""
    u = np.asarray(u, dtype=float)
    out = 0.75 * np.maximum(1.0 - u * u, 0.0)
    return out if out.ndim else float(out)


def product_kernel(v, h) -> float:
    """prod_l k(v_l / h_l), without any 1/h normalisation."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if v.shape != h.shape:
        raise DimensionMismatch(f"v has length {v.size} but h has length {h.size}")
    if np.any(h <= 0):
        raise DataError("bandwidths must be strictly positive")
    return float(np.prod(epanechnikov(v / h)))


def kernel_weights(points, centre, h):
    """Product-kernel weights of ``points`` (n, m) around ``centre`` (m,)."""
    u = (np.asarray(points) - centre) / h
    return np.prod(epanechnikov(u), axis=-1)


def _check_scale(sample_sd, n_obs):
    if not np.isfinite(sample_sd) or sample_sd < 0:
        raise DataError(f"sample_sd must be a finite non-negative number, got {sample_sd}")
    if sample_sd == 0:
        raise DegenerateScale("covariate has zero sample standard deviation")
    if n_obs < 2:
        raise DataError("need at least two observations for a bandwidth")


def silverman_bandwidth(sample_sd: float, n_obs: int) -> float:
    """2.345 * sd * n^(-1/5), the Epanechnikov rule of thumb."""
    _check_scale(sample_sd, n_obs)
    return SILVERMAN_CONSTANT * sample_sd * n_obs ** (-0.2)


def default_test_bandwidth(sample_sd: float, n_obs: int, d: int) -> float:
    """2.345 * sd * n^(-2/(d+4)): undersmoothed relative to the d-dimensional rate."""
    if d < 1:
        raise DataError("dimension d must be at least 1")
    _check_scale(sample_sd, n_obs)
    return SILVERMAN_CONSTANT * sample_sd * n_obs ** (-2.0 / (d + 4))


class BandwidthSource(str, enum.Enum):
    RULE_OF_THUMB = "RuleOfThumb"
    USER_SUPPLIED = "UserSupplied"


@dataclass(frozen=True)
class BandwidthSpec:
    """Estimation bandwidths (one per w column) and test bandwidths (one per chi column)."""

    h_est: np.ndarray
    h_test: np.ndarray
    source: BandwidthSource = BandwidthSource.RULE_OF_THUMB

    def __post_init__(self):
        for name in ("h_est", "h_test"):
            h = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            if h.ndim != 1 or h.size == 0:
                raise DimensionMismatch(f"{name} must be a non-empty vector")
            if not np.all(np.isfinite(h)) or np.any(h <= 0):
                raise DataError(f"{name} entries must be finite and strictly positive")
            h.setflags(write=False)
            object.__setattr__(self, name, h)
        object.__setattr__(self, "source", BandwidthSource(self.source))

    @classmethod
    def rule_of_thumb(cls, ds, h_est=None, h_test=None) -> "BandwidthSpec":
        """Per-coordinate defaults; explicit ``h_est``/``h_test`` override them.

        A scalar override is broadcast to every coordinate.
        """
        n = ds.n_obs
        chi = ds.chi
        d = chi.shape[1]
        supplied = h_est is not None or h_test is not None
        if h_est is None:
            h_est = [silverman_bandwidth(_sd(ds.w[:, k], ds.w_names[k]), n) for k in range(ds.d_w)]
        if h_test is None:
            names = ds.x_names + ds.w_names
            h_test = [default_test_bandwidth(_sd(chi[:, k], names[k]), n, d) for k in range(d)]
        h_est = _broadcast(h_est, ds.d_w, "h_est")
        h_test = _broadcast(h_test, d, "h_test")
        source = BandwidthSource.USER_SUPPLIED if supplied else BandwidthSource.RULE_OF_THUMB
        return cls(h_est, h_test, source)

    def to_dict(self) -> dict:
        return {"h_est": self.h_est.tolist(), "h_test": self.h_test.tolist(), "source": self.source.value}


def _sd(col, name):
    sd = float(np.std(col, ddof=1))
    if sd == 0:
        raise DegenerateScale(f"covariate {name!r} is constant")
    return sd


def _broadcast(h, size, name):
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 1:
        h = np.full(size, h[0])
    if h.size != size:
        raise DimensionMismatch(f"{name} needs {size} entries, got {h.size}")
    return h


def kernel_integral(power: int = 1, moment: int = 0, n_grid: int = 200_001) -> float:
    """Numerically integrate u^moment * k(u)^power over the support (Simpson)."""
    from scipy.integrate import simpson

    u = np.linspace(-SUPPORT, SUPPORT, n_grid)
    return float(simpson(u ** moment * epanechnikov(u) ** power, x=u))


def rate_window_flag(n_obs: int, h_test) -> bool:
    """True when N*T*sqrt(prod h) < 1, a sign the test bandwidth is degenerate."""
    return n_obs * math.sqrt(float(np.prod(h_test))) < 1.0
