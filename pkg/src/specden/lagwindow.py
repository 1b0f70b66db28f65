"""Lag windows and the classical lag-window spectral density estimator.

The estimator at frequency ``theta`` has kernel

    f(theta)(u, v) = 1/(2 pi) * sum_{|h| <= q} w(h/q) c_h(u, v) exp(-i h theta)

with ``c_h`` the empirical autocovariance kernel (normalised by ``N``).
Off-grid values use multilinear interpolation of the raw fields, so each
point evaluation costs ``O(q N)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MemoryCapError
from .grid import FieldSeries, interpolate_points
from .memory import track

DEFAULT_MEMORY_CAP = 8 * 2**30


class WindowKernel(str, enum.Enum):
    TRUNCATED = "truncated"
    BARTLETT = "bartlett"
    PARZEN = "parzen"

    @classmethod
    def parse(cls, value) -> "WindowKernel":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown window {value!r}; use truncated, bartlett or parzen") from None


def window_weight(kernel, s) -> np.ndarray | float:
    """Lag-window weight ``w(s)``; vectorised over ``s``."""
    kernel = WindowKernel.parse(kernel)
    a = np.abs(np.asarray(s, dtype=np.float64))
    if kernel is WindowKernel.TRUNCATED:
        out = np.where(a <= 1.0, 1.0, 0.0)
    elif kernel is WindowKernel.BARTLETT:
        out = np.where(a <= 1.0, 1.0 - a, 0.0)
    else:
        out = np.where(
            a < 0.5,
            1.0 - 6.0 * a**2 + 6.0 * a**3,
            np.where(a <= 1.0, 2.0 * (1.0 - a) ** 3, 0.0),
        )
    return float(out) if out.ndim == 0 else out


def lag_weights(kernel, q: int) -> np.ndarray:
    """``w(h/q)`` for ``h = -q .. q``."""
    if q < 1:
        raise DomainError("bandwidth q must be >= 1")
    return window_weight(kernel, np.arange(-q, q + 1) / q)


def r_weight(kernel, h: int, h2: int, q: int, theta: float) -> float:
    """Real frequency weight ``w(h/q) w(h'/q) cos((h - h') theta) / (4 pi^2)``."""
    if q < 1:
        raise DomainError("bandwidth q must be >= 1")
    wh = window_weight(kernel, h / q)
    wh2 = window_weight(kernel, h2 / q)
    return wh * wh2 * math.cos((h - h2) * theta) / (4.0 * math.pi**2)


def r_matrix(kernel, q: int, theta: float) -> np.ndarray:
    """All ``r(h, h'; theta)`` for ``h, h' = -q .. q`` as a ``(2q+1, 2q+1)`` array."""
    w = lag_weights(kernel, q)
    lags = np.arange(-q, q + 1)
    return np.outer(w, w) * np.cos(np.subtract.outer(lags, lags) * theta) / (4.0 * math.pi**2)


@dataclass(frozen=True)
class SpectralEval:
    """One value of a spectral density kernel, ``value = cospectrum - i quadspectrum``."""

    theta: float
    u: tuple
    v: tuple
    cospectrum: float
    quadspectrum: float

    @property
    def value(self) -> complex:
        return complex(self.cospectrum, -self.quadspectrum)


def spectral_from_autocov(cov_by_lag: np.ndarray, kernel, q: int, theta) -> tuple:
    """Combine autocovariances ``c_h`` (leading axis ``h = -q..q``) into co/quad spectra.

    ``theta`` may be a scalar or broadcast against the trailing axes.
    """
    w = lag_weights(kernel, q)
    lags = np.arange(-q, q + 1).reshape((-1,) + (1,) * (cov_by_lag.ndim - 1))
    wc = w.reshape(lags.shape) * cov_by_lag
    ang = lags * np.asarray(theta, dtype=np.float64)
    co = np.sum(wc * np.cos(ang), axis=0) / (2.0 * math.pi)
    quad = np.sum(wc * np.sin(ang), axis=0) / (2.0 * math.pi)
    return co, quad


def autocov_from_values(xu: np.ndarray, xv: np.ndarray, h: int) -> np.ndarray:
    """``1/N sum_k x_{h+k}(u) x_k(v)`` from values ``(N, P)`` at paired points."""
    n = xu.shape[0]
    if abs(h) >= n:
        return np.zeros(xu.shape[1:])
    if h >= 0:
        return np.einsum("np,np->p", xu[h:], xv[: n - h]) / n
    m = -h
    return np.einsum("np,np->p", xu[: n - m], xv[m:]) / n


def emp_autocov_eval(series: FieldSeries, h: int, u, v) -> float:
    """Empirical autocovariance kernel ``c_h(u, v)``; zero when ``|h| >= N``."""
    xs = interpolate_points(series, np.vstack([np.atleast_2d(u), np.atleast_2d(v)]))
    return float(autocov_from_values(xs[:, :1], xs[:, 1:], int(h))[0])


def emp_spectral_pairs(series: FieldSeries, kernel, q: int, theta: float, us, vs):
    """Cospectrum and quadspectrum at paired points ``us[i], vs[i]``."""
    xu = interpolate_points(series, us)
    xv = interpolate_points(series, vs)
    cov = track(np.stack([autocov_from_values(xu, xv, h) for h in range(-q, q + 1)]))
    return spectral_from_autocov(cov, kernel, q, theta)


def emp_spectral_eval(series: FieldSeries, kernel, q: int, theta: float, u, v) -> SpectralEval:
    """Lag-window estimate of the spectral density kernel at ``(theta, u, v)``."""
    if q < 1:
        raise DomainError("bandwidth q must be >= 1")
    co, quad = emp_spectral_pairs(series, kernel, q, theta, np.atleast_2d(u), np.atleast_2d(v))
    return SpectralEval(
        float(theta),
        tuple(np.ravel(u).tolist()),
        tuple(np.ravel(v).tolist()),
        float(co[0]),
        float(quad[0]),
    )


class EmpiricalEstimator:
    """Lag-window estimator bound to a series, evaluated at batches of points."""

    kind = "empirical"

    def __init__(self, series: FieldSeries, kernel="parzen", q: int = 20):
        if q < 1:
            raise DomainError("bandwidth q must be >= 1")
        self.series = series
        self.kernel = WindowKernel.parse(kernel)
        self.q = int(q)

    def evaluate(self, theta: float, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        co, quad = emp_spectral_pairs(self.series, self.kernel, self.q, theta, us, vs)
        return co - 1j * quad


def full_kernel_bytes(grid_size: int, q: int) -> int:
    return (2 * q + 1) * grid_size * grid_size * 8


def emp_full_kernels(
    series: FieldSeries, q: int, memory_cap: int = DEFAULT_MEMORY_CAP, force: bool = False
) -> list:
    """Materialise ``c_h`` on the grid for ``h = -q .. q`` as ``G x G`` matrices.

    Entry ``[g, g']`` is ``c_h(u_g, u_g')``. Refuses with :class:`MemoryCapError`
    when ``(2q+1) G^2`` doubles exceed ``memory_cap`` unless ``force``.
    """
    if q < 1:
        raise DomainError("bandwidth q must be >= 1")
    g = series.grid.size
    need = full_kernel_bytes(g, q)
    if need > memory_cap and not force:
        raise MemoryCapError(
            f"full autocovariance kernels need {need} bytes "
            f"({(2 * q + 1)} x {g}x{g} doubles), cap is {memory_cap} bytes",
            estimate_bytes=need,
            cap_bytes=memory_cap,
        )
    x = series.values
    n = series.n
    pos = []
    for h in range(q + 1):
        if h >= n:
            pos.append(track(np.zeros((g, g))))
        else:
            pos.append(track(x[h:].T @ x[: n - h] / n))
    neg = [track(np.ascontiguousarray(pos[h].T)) for h in range(q, 0, -1)]
    return neg + pos


def spectral_matrix(kernels: list, kernel, q: int, theta: float) -> np.ndarray:
    """Complex ``G x G`` kernel matrix ``1/(2 pi) sum_h w(h/q) C_h e^{-i h theta}``."""
    w = lag_weights(kernel, q)
    out = np.zeros(kernels[0].shape, dtype=np.complex128)
    for i, h in enumerate(range(-q, q + 1)):
        if w[i] != 0.0:
            out += (w[i] * np.exp(-1j * h * theta)) * kernels[i]
    return out / (2.0 * math.pi)
