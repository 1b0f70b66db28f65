"""Grid-linear training loss and its reverse-mode gradient.

The loss integrates the Hilbert-Schmidt distance between the lag-window
estimates built from the data and from the model fields over a frequency
grid. Expanding the squared norm, every term reduces to lag-shifted
correlations of ``N x N`` Gram matrices, so nothing of size ``G x G`` is
ever formed:

    S(theta) = 1/N^2 sum_{h,h'} r(h, h'; theta) [A_XX - 2 A_XY + A_YY](h, h')
    A_PP(h, h') = sum_{k,k'} P(k+h, k'+h') P(k, k')

The two cross terms coincide because ``r`` is symmetric in ``(h, h')`` and
``A_YX(h, h') = A_XY(h', h)``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import correlate2d

from ..errors import DimensionError
from ..grid import FieldSeries
from ..memory import track
from ..lagwindow import r_matrix
from .model import model_field_values


def freq_nodes(t: int) -> np.ndarray:
    """Midpoint frequency nodes ``-pi + (2 tau - 1) pi / T``, ``tau = 1..T``."""
    return -math.pi + (2.0 * np.arange(1, t + 1) - 1.0) * math.pi / t


def r_stack(kernel, q: int, t: int) -> np.ndarray:
    """``(T, 2q+1, 2q+1)`` frequency weights at every node."""
    return np.stack([r_matrix(kernel, q, th) for th in freq_nodes(t)])


def lag_correlation(p: np.ndarray, q: int) -> np.ndarray:
    """``A(h, h') = sum_{k,k'} P(k+h, k'+h') P(k, k')`` for ``|h|, |h'| <= q``.

    Row ``i`` of the result is ``h = i - q``. Out-of-range entries of ``P``
    count as zero.
    """
    return correlate2d(np.pad(p, q), p, mode="valid")


def _gram(a: np.ndarray, b: np.ndarray, w: float) -> np.ndarray:
    out = np.einsum("sg,tg->st", a, b, optimize=False)
    out *= w
    return track(out)


def _shift_correlate(p: np.ndarray, w: np.ndarray, q: int) -> np.ndarray:
    """``out(a, b) = sum_{h,h'} W(h, h') P(a+h, b+h')``, shape of ``P``."""
    return correlate2d(np.pad(p, q), w, mode="valid")


class _AxxCache:
    def __init__(self):
        self.store = {}

    def get(self, data: FieldSeries, q: int) -> np.ndarray:
        key = (data.digest, q)
        if key not in self.store:
            self.store[key] = lag_correlation(_gram(data.values, data.values, data.grid.quad_weight), q)
        return self.store[key]

    def clear(self):
        self.store.clear()


_axx = _AxxCache()


def clear_cache() -> None:
    """Drop cached data-only correlation terms."""
    _axx.clear()


def _check(model, data: FieldSeries):
    if model.grid != data.grid:
        raise DimensionError(f"model grid {model.grid} differs from data grid {data.grid}")
    if model.n != data.n:
        raise DimensionError(f"model has n={model.n} but the data have N={data.n}")


def _s_values(model, data, cfg, y):
    q = cfg.q
    n = data.n
    axx = _axx.get(data, q)
    w = data.grid.quad_weight
    gxy = _gram(data.values, y, w)
    gyy = _gram(y, y, w)
    comb = axx - 2.0 * lag_correlation(gxy, q) + lag_correlation(gyy, q)
    rs = r_stack(cfg.window, q, cfg.freq_points)
    s = np.einsum("tij,ij->t", rs, comb) / (n * n)
    return s, rs, gxy, gyy


def _loss_from_s(s, cfg):
    wq = 2.0 * math.pi / cfg.freq_points
    return float(np.sum(wq * np.sqrt(np.maximum(s, 0.0) + cfg.sqrt_eps)))


def loss(model, data: FieldSeries, cfg) -> float:
    """Frequency-integrated HS distance between data and model lag-window estimates."""
    _check(model, data)
    y = model_field_values(model)
    s, *_ = _s_values(model, data, cfg, y)
    return _loss_from_s(s, cfg)


def loss_and_grad(model, data: FieldSeries, cfg):
    """Loss and gradients for ``xi`` and every network parameter.

    Returns ``(loss, grads)`` with ``grads`` a dict keyed like
    :meth:`SpectralNNModel.param_names`.
    """
    _check(model, data)
    n = data.n
    q = cfg.q
    pts = model.grid.points()
    out, cache = model.bank.forward(pts, keep=True)
    phi = out.reshape(model.n_basis, -1)
    xbig = model.score_windows()
    y = track(xbig @ phi)
    s, rs, gxy, gyy = _s_values(model, data, cfg, y)
    value = _loss_from_s(s, cfg)

    wq = 2.0 * math.pi / cfg.freq_points
    pos = s > 0
    ds = np.where(pos, wq * 0.5 / np.sqrt(np.where(pos, s, 0.0) + cfg.sqrt_eps), 0.0)
    wmat = np.tensordot(ds, rs, axes=(0, 0)) / (n * n)

    w = data.grid.quad_weight
    d_gxy = -4.0 * _shift_correlate(gxy, wmat, q)
    d_gyy = 2.0 * _shift_correlate(gyy, wmat, q)
    dy = track(w * (d_gxy.T @ data.values) + w * ((d_gyy + d_gyy.T) @ y))

    d_phi = xbig.T @ dy
    d_xbig = dy @ phi.T
    width = 2 * model.lags + 1
    d_win = d_xbig.reshape(n, model.m, width)
    d_xi = np.zeros_like(model.xi)
    for j in range(width):
        d_xi[:, j : j + n] += d_win[:, :, j].T

    grads = {"xi": d_xi}
    grads.update(model.bank.backward(d_phi.reshape(model.bank.lead + (-1,)), cache))
    return value, grads
