"""Neural random-field model: scores times networks, and its fitted spectra.

The model field at time ``t = 1..N`` is

    Xt(u) = sum_{h=-L..L} sum_{m=1..M} xi[m, t+h] * g[m, h](u)

with ``xi`` stored for ``s = 1-L .. N+L`` (column ``s + L - 1``). The
``M (2L+1)`` networks act as a function basis; index ``b = m (2L+1) + h + L``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DimensionError, DomainError, ParseError, TruncatedFileError
from ..grid import Grid
from ..lagwindow import autocov_from_values, lag_weights, r_matrix, spectral_from_autocov, SpectralEval
from ..memory import track
from .mlp import Architecture, NetworkBank

MODEL_MAGIC = b"SPECNN01"


@dataclass(eq=False)
class SpectralNNModel:
    m: int
    lags: int
    n: int
    grid: Grid
    bank: NetworkBank
    xi: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 1 or self.lags < 0 or self.n < 1:
            raise DimensionError("need M >= 1, L >= 0, N >= 1")
        self.xi = np.asarray(self.xi, dtype=np.float64)
        if self.xi.shape != (self.m, self.n + 2 * self.lags):
            raise DimensionError(
                f"xi must have shape {(self.m, self.n + 2 * self.lags)}, got {self.xi.shape}"
            )
        if self.bank.lead != (self.m, 2 * self.lags + 1):
            raise DimensionError("network bank shape does not match (M, 2L+1)")
        if self.bank.dim != self.grid.dim:
            raise DimensionError("network input dimension differs from the grid dimension")

    @property
    def n_basis(self) -> int:
        return self.m * (2 * self.lags + 1)

    @property
    def arch(self) -> Architecture:
        return self.bank.arch

    @classmethod
    def initialize(cls, grid: Grid, n: int, m: int = 10, lags: int = 10, arch=None, seed: int = 0,
                   xi_scale: float = 0.1, init_scale: float = 1.0):
        arch = arch or Architecture()
        ss = np.random.SeedSequence(int(seed))
        net_seed, xi_seed = ss.spawn(2)
        bank = NetworkBank.initialize(
            arch, grid.dim, (m, 2 * lags + 1), np.random.Generator(np.random.Philox(net_seed)), init_scale
        )
        xi = xi_scale * np.random.Generator(np.random.Philox(xi_seed)).standard_normal((m, n + 2 * lags))
        return cls(m, lags, n, grid, bank, xi, {"seed": int(seed)})

    # -- parameter vector ---------------------------------------------------------

    def param_names(self) -> list:
        return ["xi"] + [name for name, _ in self.arch.param_shapes(self.grid.dim)]

    def param_arrays(self) -> list:
        return [self.xi] + [self.bank.params[name] for name, _ in self.arch.param_shapes(self.grid.dim)]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.param_arrays()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        pos = 0
        arrays = self.param_arrays()
        total = sum(a.size for a in arrays)
        if flat.shape != (total,):
            raise DimensionError(f"flat parameter vector must have length {total}")
        for name, arr in zip(self.param_names(), arrays):
            new = flat[pos : pos + arr.size].reshape(arr.shape).copy()
            pos += arr.size
            if name == "xi":
                self.xi = new
            else:
                self.bank.params[name] = new

    def copy(self) -> "SpectralNNModel":
        bank = NetworkBank(self.arch, self.grid.dim, self.bank.lead,
                           {k: v.copy() for k, v in self.bank.params.items()})
        return SpectralNNModel(self.m, self.lags, self.n, self.grid, bank, self.xi.copy(), dict(self.meta))

    # -- field values --------------------------------------------------------------

    def score_windows(self) -> np.ndarray:
        """``(N, B)`` matrix whose row ``t`` holds ``xi[m, t+h]`` in basis order."""
        width = 2 * self.lags + 1
        win = np.lib.stride_tricks.sliding_window_view(self.xi, width, axis=1)  # (M, N, 2L+1)
        return np.ascontiguousarray(win.transpose(1, 0, 2)).reshape(self.n, self.m * width)

    def basis_values(self, pts: np.ndarray) -> np.ndarray:
        """Network outputs at ``pts`` as a ``(B, P)`` array."""
        return self.bank.evaluate(pts).reshape(self.n_basis, -1)

    def values_at(self, pts: np.ndarray) -> np.ndarray:
        """Model fields ``Xt(u)`` at ``pts``: shape ``(N, P)``."""
        return track(self.score_windows() @ self.basis_values(pts))

    def lag_basis_cov(self, q: int) -> np.ndarray:
        """``C_h = 1/N sum_k xi_row[k+h] xi_row[k]^T`` for ``h = -q..q``; shape ``(2q+1, B, B)``."""
        s = self.score_windows()
        n = self.n
        out = np.zeros((2 * q + 1, self.n_basis, self.n_basis))
        for h in range(0, min(q, n - 1) + 1):
            ch = s[h:].T @ s[: n - h] / n
            out[q + h] = ch
            out[q - h] = ch.T
        return track(out)


def model_field_values(model: SpectralNNModel) -> np.ndarray:
    """Model fields on the full grid, ``(N, G)``.

    Each network is evaluated once per grid point, so the cost is linear in ``G``.
    """
    return model.values_at(model.grid.points())


def fitted_values_pairs(model: SpectralNNModel, us, vs):
    us = np.atleast_2d(np.asarray(us, dtype=np.float64))
    vs = np.atleast_2d(np.asarray(vs, dtype=np.float64))
    for pts in (us, vs):
        if pts.shape[1] != model.grid.dim:
            raise DimensionError(f"points must have {model.grid.dim} coordinates")
        if np.any(pts < 0) or np.any(pts > 1):
            raise DomainError("points must lie in [0, 1]^d")
    return model.values_at(us), model.values_at(vs)


def fitted_autocov_eval(model: SpectralNNModel, h: int, u, v) -> float:
    """Autocovariance kernel of the model fields at ``(u, v)``, evaluated through the networks."""
    xu, xv = fitted_values_pairs(model, u, v)
    return float(autocov_from_values(xu, xv, int(h))[0])


def fitted_spectral_pairs(model: SpectralNNModel, kernel, q: int, theta: float, us, vs):
    xu, xv = fitted_values_pairs(model, us, vs)
    cov = track(np.stack([autocov_from_values(xu, xv, h) for h in range(-q, q + 1)]))
    return spectral_from_autocov(cov, kernel, q, theta)


def fitted_spectral_eval(model: SpectralNNModel, kernel, q: int, theta: float, u, v) -> SpectralEval:
    if q < 1:
        raise DomainError("bandwidth q must be >= 1")
    co, quad = fitted_spectral_pairs(model, kernel, q, theta, u, v)
    return SpectralEval(float(theta), tuple(np.ravel(u).tolist()), tuple(np.ravel(v).tolist()),
                        float(co[0]), float(quad[0]))


class SpectralNNEstimator:
    """Fitted model bound to a window and bandwidth, evaluated at point batches."""

    kind = "spectral-nn"

    def __init__(self, model: SpectralNNModel, kernel="parzen", q: int = 20):
        if q < 1:
            raise DomainError("bandwidth q must be >= 1")
        self.model = model
        self.kernel = kernel
        self.q = int(q)

    def evaluate(self, theta: float, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        co, quad = fitted_spectral_pairs(self.model, self.kernel, self.q, theta, us, vs)
        return co - 1j * quad


def _basis_gram(model: SpectralNNModel) -> np.ndarray:
    phi = model.basis_values(model.grid.points())
    return track(model.grid.quad_weight * (phi @ phi.T))


def _gram_sqrt(gamma: np.ndarray, rel_tol: float = 1e-12):
    """Symmetric square root of the basis Gram restricted to its numerical range.

    Returns ``S`` of shape ``(B, r)`` with ``S S^T = Gamma`` on the kept directions.
    """
    evals, evecs = np.linalg.eigh(gamma)
    top = evals.max() if evals.size else 0.0
    keep = evals > rel_tol * top if top > 0 else np.zeros_like(evals, dtype=bool)
    return evecs[:, keep] * np.sqrt(evals[keep])


def basis_spectral_matrix(lag_cov: np.ndarray, kernel, q: int, theta: float) -> np.ndarray:
    """``1/(2 pi) sum_h w(h/q) e^{-i h theta} C_h`` (Hermitian ``B x B``)."""
    w = lag_weights(kernel, q)
    phase = w * np.exp(-1j * np.arange(-q, q + 1) * theta)
    return np.tensordot(phase, lag_cov, axes=(0, 0)) / (2.0 * math.pi)


def spectral_eigendecomposition(model: SpectralNNModel, kernel, q: int, theta: float) -> np.ndarray:
    """Eigenvalues of the fitted spectral density operator, nonincreasing.

    The operator lives in the span of the network basis; with Gram matrix
    ``Gamma`` and coefficient matrix ``K`` its nonzero spectrum equals that of
    ``Gamma^{1/2} K Gamma^{1/2}``. Directions with Gram eigenvalue below
    ``1e-12`` of the largest are dropped; the returned list has length
    ``B`` with those slots set to zero.
    """
    if q < 1:
        raise DomainError("bandwidth q must be >= 1")
    sq = _gram_sqrt(_basis_gram(model))
    kmat = basis_spectral_matrix(model.lag_basis_cov(q), kernel, q, theta)
    red = sq.T @ kmat @ sq
    red = 0.5 * (red + red.conj().T)
    vals = np.linalg.eigvalsh(red) if red.size else np.zeros(0)
    out = np.zeros(model.n_basis)
    out[: vals.size] = vals
    return np.sort(out)[::-1]


def magnitude_curve(model: SpectralNNModel, kernel, q: int, thetas) -> list:
    """``(theta, ||F(theta)||_HS)`` pairs computed in the network basis.

    ``||F||^2 = sum_{h,h'} r(h, h'; theta) <C_h, C_h'>_Gamma`` where
    ``<A, B>_Gamma = tr(A Gamma B^T Gamma)``; no ``G x G`` kernel is formed.
    """
    if q < 1:
        raise DomainError("bandwidth q must be >= 1")
    sq = _gram_sqrt(_basis_gram(model))
    lag_cov = model.lag_basis_cov(q)
    red = np.einsum("bi,hbc,cj->hij", sq, lag_cov, sq, optimize=True).reshape(2 * q + 1, -1)
    hs = red @ red.T
    hs = 0.5 * (hs + hs.T)
    out = []
    for th in np.atleast_1d(np.asarray(thetas, dtype=np.float64)):
        sq_norm = float(np.sum(r_matrix(kernel, q, th) * hs))
        out.append((float(th), math.sqrt(max(sq_norm, 0.0))))
    return out


# -- model file -------------------------------------------------------------------------


def model_to_bytes(model: SpectralNNModel) -> bytes:
    header = {
        "M": model.m,
        "L": model.lags,
        "n": model.n,
        "grid": {"dim": model.grid.dim, "k": model.grid.k},
        "arch": model.arch.kind,
        "depth": model.arch.depth,
        "width": model.arch.width,
        "heads": model.arch.n_heads,
        "dtype": "f64le",
        "params": [[name, list(arr.shape)] for name, arr in zip(model.param_names(), model.param_arrays())],
        "meta": model.meta,
    }
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(model.get_flat(), dtype="<f8").tobytes()
    return MODEL_MAGIC + struct.pack("<I", len(hdr)) + hdr + payload


def save_model(model: SpectralNNModel, path) -> Path:
    path = Path(path)
    path.write_bytes(model_to_bytes(model))
    return path


def model_from_bytes(buf: bytes) -> SpectralNNModel:
    if buf[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise ParseError("missing SPECNN01 magic", 0)
    pos = len(MODEL_MAGIC)
    if len(buf) < pos + 4:
        raise TruncatedFileError("header length prefix truncated", len(buf))
    (hlen,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    try:
        header = json.loads(buf[pos : pos + hlen].decode("utf-8"))
        grid = Grid(header["grid"]["dim"], header["grid"]["k"])
        arch = Architecture(header["arch"], header["depth"], header["width"], header.get("heads"))
        m, lags, n = header["M"], header["L"], header["n"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad model header: {exc}", pos) from None
    pos += hlen
    shapes = [(name, tuple(shape)) for name, shape in header["params"]]
    count = sum(int(np.prod(s)) for _, s in shapes)
    if len(buf) != pos + 8 * count:
        raise TruncatedFileError(
            f"payload should hold {count} values ending at byte {pos + 8 * count}", len(buf)
        )
    flat = np.frombuffer(buf, dtype="<f8", count=count, offset=pos)
    arrays = {}
    off = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        arrays[name] = flat[off : off + size].reshape(shape).copy()
        off += size
    bank = NetworkBank(arch, grid.dim, (m, 2 * lags + 1), {k: v for k, v in arrays.items() if k != "xi"})
    return SpectralNNModel(m, lags, n, grid, bank, arrays["xi"], header.get("meta", {}))


def load_model(path) -> SpectralNNModel:
    return model_from_bytes(Path(path).read_bytes())
