"""Regular midpoint grids on the unit cube and series of fields sampled on them.

Grid points sit at cell midpoints ``(2j - 1) / (2K)`` along every axis and are
enumerated row-major, last axis fastest. A field is a length-``G`` vector in
that order; a :class:`FieldSeries` stacks ``N`` of them time-major.

Inner products use the midpoint rule with weight ``1 / G``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    DegeneratePointError,
    DimensionError,
    DomainError,
    ParseError,
    TimeIndexError,
    TruncatedFileError,
)
from .memory import track

SERIES_MAGIC = b"FTSGRID1"
SERIES_LAYOUT = "time-major,last-axis-fastest"

# snap tolerance for interpolation coordinates that land on a node
_NODE_SNAP = 1e-9


@dataclass(frozen=True)
class Grid:
    """``K**dim`` midpoint grid on ``[0, 1]**dim``."""

    dim: int
    k: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DimensionError(f"grid dim must be a positive integer, got {self.dim!r}")
        if int(self.k) != self.k or self.k < 1:
            raise DimensionError(f"points per axis must be a positive integer, got {self.k!r}")

    @property
    def size(self) -> int:
        return self.k**self.dim

    @property
    def quad_weight(self) -> float:
        return 1.0 / self.size

    def axis(self) -> np.ndarray:
        j = np.arange(1, self.k + 1)
        return (2 * j - 1) / (2.0 * self.k)

    def points(self) -> np.ndarray:
        """All grid points as a ``(G, dim)`` array in enumeration order."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def flat_index(self, multi_index) -> int:
        return int(np.ravel_multi_index(tuple(multi_index), (self.k,) * self.dim))


@dataclass(frozen=True, eq=False)
class FieldSeries:
    """``N`` real fields on a shared grid; ``values`` has shape ``(N, G)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2:
            raise DimensionError(f"values must be 2-D (N, G), got shape {vals.shape}")
        if vals.shape[0] < 1:
            raise DimensionError("a series needs at least one field (N >= 1)")
        if vals.shape[1] != self.grid.size:
            raise DimensionError(
                f"values have {vals.shape[1]} columns but the grid has {self.grid.size} points"
            )
        if not np.all(np.isfinite(vals)):
            raise DomainError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @cached_property
    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(f"{self.grid.dim}:{self.grid.k}:{self.n}".encode())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()


def inner_product(a, b, grid: Grid) -> float:
    """Midpoint-rule ``L2`` inner product of two sampled fields."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (grid.size,) or b.shape != (grid.size,):
        raise DimensionError(
            f"inner_product expects vectors of length {grid.size}, got {a.shape} and {b.shape}"
        )
    return grid.quad_weight * float(np.dot(a, b))


def gram(a: FieldSeries, b: FieldSeries) -> np.ndarray:
    """Matrix of inner products ``<a_s, b_t>``, shape ``(N_a, N_b)``.

    Every entry is summed over grid points in the same order regardless of
    argument order, so ``gram(a, b).T == gram(b, a)`` holds bit for bit.
    """
    if a.grid != b.grid:
        raise DimensionError(f"grid mismatch: {a.grid} vs {b.grid}")
    out = np.einsum("sg,tg->st", a.values, b.values, optimize=False)
    out *= a.grid.quad_weight
    return track(out)


def _interp_stencil(grid: Grid, pts: np.ndarray):
    """Corner flat indices and weights for multilinear interpolation.

    Returns ``(idx, wts)`` of shape ``(2**dim, P)``.
    """
    k, d = grid.k, grid.dim
    pos = pts * k - 0.5
    pos = np.clip(pos, 0.0, k - 1.0)
    near = np.rint(pos)
    pos = np.where(np.abs(pos - near) < _NODE_SNAP, near, pos)
    if k == 1:
        lo = np.zeros_like(pos, dtype=np.int64)
        frac = np.zeros_like(pos)
    else:
        lo = np.minimum(np.floor(pos).astype(np.int64), k - 2)
        frac = pos - lo
    n_corner = 1 << d
    idx = np.zeros((n_corner, pts.shape[0]), dtype=np.int64)
    wts = np.ones((n_corner, pts.shape[0]))
    for c in range(n_corner):
        for ax in range(d):
            up = (c >> (d - 1 - ax)) & 1
            i_ax = lo[:, ax] + up if k > 1 else lo[:, ax]
            idx[c] = idx[c] * k + i_ax
            wts[c] *= frac[:, ax] if up else 1.0 - frac[:, ax]
    return idx, wts


def _check_points(pts, dim: int) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if pts.shape[1] != dim:
        raise DimensionError(f"points must have {dim} coordinates, got shape {pts.shape}")
    if np.any(~np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DomainError("interpolation points must lie in [0, 1]^d")
    return pts


def interpolate_points(series: FieldSeries, pts) -> np.ndarray:
    """Interpolate every field of ``series`` at ``pts`` (shape ``(P, d)``).

    Returns an ``(N, P)`` array.
    """
    pts = _check_points(pts, series.grid.dim)
    idx, wts = _interp_stencil(series.grid, pts)
    out = np.zeros((series.n, pts.shape[0]))
    for c in range(idx.shape[0]):
        out += series.values[:, idx[c]] * wts[c]
    return track(out)


def interpolate(series: FieldSeries, t: int, u) -> float:
    """Value of field ``t`` (1-based) at point ``u``; clamped outside the midpoint hull."""
    if int(t) != t or not 1 <= t <= series.n:
        raise TimeIndexError(f"time index {t} outside 1..{series.n}")
    pts = _check_points(np.asarray(u, dtype=np.float64).reshape(1, -1), series.grid.dim)
    idx, wts = _interp_stencil(series.grid, pts)
    row = series.values[int(t) - 1]
    return float(sum(row[idx[c, 0]] * wts[c, 0] for c in range(idx.shape[0])))


def detrend_standardize(series: FieldSeries, degree: int = 3) -> FieldSeries:
    """Remove a per-point polynomial trend in time and scale to unit variance.

    The trend is fitted by least squares on ``1, t, ..., t**degree`` with
    ``t`` rescaled to ``[-1, 1]``; residuals are divided by their sample
    standard deviation (``ddof=1``).
    """
    n = series.n
    if degree < 0:
        raise DomainError("degree must be non-negative")
    if n <= degree + 1:
        raise DimensionError(f"need N > degree + 1 = {degree + 1} fields, got {n}")
    tt = np.linspace(-1.0, 1.0, n)
    basis = np.vander(tt, degree + 1, increasing=True)
    q, _ = np.linalg.qr(basis)
    x = series.values
    resid = x - q @ (q.T @ x)
    sd = resid.std(axis=0, ddof=1)
    scale = np.sqrt(np.mean(x**2, axis=0))
    bad = sd <= 1e-10 * scale + 1e-300
    if np.any(bad):
        g = int(np.flatnonzero(bad)[0])
        mi = np.unravel_index(g, (series.grid.k,) * series.grid.dim)
        coords = series.grid.points()[g]
        raise DegeneratePointError(
            f"zero residual variance at grid point {g} (index {tuple(int(i) for i in mi)}, "
            f"u={tuple(float(c) for c in coords)})",
            point=g,
        )
    return FieldSeries(series.grid, resid / sd)


def _series_header(series: FieldSeries, meta: dict | None = None) -> bytes:
    header = {
        "dim": series.grid.dim,
        "k": series.grid.k,
        "n": series.n,
        "dtype": "f64le",
        "layout": SERIES_LAYOUT,
    }
    if meta:
        header["meta"] = meta
    return json.dumps(header, sort_keys=True).encode("utf-8")


def series_to_bytes(series: FieldSeries, meta: dict | None = None) -> bytes:
    """Serialise to the FTSGRID1 format; ``meta`` is stored verbatim in the header."""
    hdr = _series_header(series, meta)
    payload = np.ascontiguousarray(series.values, dtype="<f8").tobytes()
    return SERIES_MAGIC + struct.pack("<I", len(hdr)) + hdr + payload


def write_series(series: FieldSeries, path, meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_bytes(series_to_bytes(series, meta))
    return path


def series_from_bytes(buf: bytes) -> FieldSeries:
    if len(buf) < len(SERIES_MAGIC) or buf[: len(SERIES_MAGIC)] != SERIES_MAGIC:
        raise ParseError("missing FTSGRID1 magic", 0)
    pos = len(SERIES_MAGIC)
    if len(buf) < pos + 4:
        raise TruncatedFileError("header length prefix truncated", len(buf))
    (hlen,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    if len(buf) < pos + hlen:
        raise TruncatedFileError(f"header truncated, expected {hlen} bytes", len(buf))
    try:
        header = json.loads(buf[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"header is not valid UTF-8 JSON: {exc}", pos) from None
    if not isinstance(header, dict):
        raise ParseError("header must be a JSON object", pos)
    for key in ("dim", "k", "n"):
        val = header.get(key)
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise ParseError(f"header field {key!r} must be a positive integer, got {val!r}", pos)
    if header.get("dtype", "f64le") != "f64le":
        raise ParseError(f"unsupported dtype {header.get('dtype')!r}", pos)
    if header.get("layout", SERIES_LAYOUT) != SERIES_LAYOUT:
        raise ParseError(f"unsupported layout {header.get('layout')!r}", pos)
    pos += hlen
    grid = Grid(header["dim"], header["k"])
    count = header["n"] * grid.size
    end = pos + 8 * count
    if len(buf) < end:
        err = TruncatedFileError(
            f"payload truncated: header promises {count} values ending at byte {end}, "
            f"file has {len(buf)} bytes",
            len(buf),
        )
        err.expected_end = end
        raise err
    if len(buf) > end:
        raise ParseError(f"{len(buf) - end} unexpected trailing bytes after payload", end)
    values = np.frombuffer(buf, dtype="<f8", count=count, offset=pos)
    values = values.reshape(header["n"], grid.size)
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values.ravel()))[0])
        raise ParseError("non-finite value in payload", pos + 8 * bad)
    return FieldSeries(grid, values)


def read_series(path) -> FieldSeries:
    return series_from_bytes(Path(path).read_bytes())
