"""Innovation covariance models, Gaussian field sampling and the FAR(1) simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .bessel import bessel_k
from .errors import ConfigError, DomainError, NotPositiveDefiniteError
from .grid import FieldSeries, Grid


@dataclass(frozen=True)
class BrownianSheet:
    name = "brownian"


@dataclass(frozen=True)
class IntegratedBrownianSheet:
    name = "integrated-brownian"


@dataclass(frozen=True)
class Matern:
    nu: float
    name = "matern"

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ConfigError(f"Matern smoothness nu must be positive, got {self.nu!r}")


CovarianceModel = Union[BrownianSheet, IntegratedBrownianSheet, Matern]


def model_from_name(name: str, nu: float | None = None) -> CovarianceModel:
    key = name.lower().replace("_", "-")
    if key in ("brownian", "brownian-sheet", "bm"):
        return BrownianSheet()
    if key in ("integrated-brownian", "integrated-brownian-sheet", "ibm"):
        return IntegratedBrownianSheet()
    if key == "matern":
        if nu is None:
            raise ConfigError("Matern model requires nu")
        return Matern(float(nu))
    raise ConfigError(f"unknown covariance model {name!r}")


def _ibm(a, b):
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return 0.5 * lo * lo * hi - lo**3 / 6.0


def matern_of_distance(nu: float, r) -> np.ndarray:
    """Unit-variance Matérn correlation as a function of distance ``r >= 0``."""
    r = np.asarray(r, dtype=np.float64)
    out = np.ones_like(r)
    pos = r > 0
    if pos.any():
        rp, inv = np.unique(r[pos], return_inverse=True)
        x = math.sqrt(2.0 * nu) * rp
        # log form keeps 2^(1-nu)/Gamma(nu) * x^nu finite for small nu
        logpref = (1.0 - nu) * math.log(2.0) - math.lgamma(nu) + nu * np.log(x)
        out[pos] = (np.exp(logpref) * bessel_k(nu, x))[inv]
    return out


def _kernel_block(model: CovarianceModel, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Kernel between point sets ``u`` (P, d) and ``v`` (Q, d): shape (P, Q)."""
    if isinstance(model, BrownianSheet):
        out = np.ones((u.shape[0], v.shape[0]))
        for ax in range(u.shape[1]):
            out *= np.minimum(u[:, ax, None], v[None, :, ax])
        return out
    if isinstance(model, IntegratedBrownianSheet):
        out = np.ones((u.shape[0], v.shape[0]))
        for ax in range(u.shape[1]):
            out *= _ibm(u[:, ax, None], v[None, :, ax])
        return out
    if isinstance(model, Matern):
        diff = u[:, None, :] - v[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        return matern_of_distance(model.nu, r)
    raise ConfigError(f"unknown covariance model {model!r}")


def _check_unit(pts, name):
    pts = np.atleast_1d(np.asarray(pts, dtype=np.float64))
    if np.any(pts < 0) or np.any(pts > 1) or np.any(~np.isfinite(pts)):
        raise DomainError(f"{name} must lie in [0, 1]^d")
    return pts


def cov_kernel(model: CovarianceModel, u, v) -> float:
    """Innovation covariance ``c0(u, v)``."""
    u = _check_unit(u, "u")
    v = _check_unit(v, "v")
    if u.shape != v.shape:
        raise DomainError("u and v must have the same dimension")
    return float(_kernel_block(model, u[None, :], v[None, :])[0, 0])


def cov_kernel_pairs(model: CovarianceModel, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``c0(u_i, v_i)`` for paired rows of ``u`` and ``v`` (both (P, d))."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if isinstance(model, BrownianSheet):
        return np.prod(np.minimum(u, v), axis=1)
    if isinstance(model, IntegratedBrownianSheet):
        return np.prod(_ibm(u, v), axis=1)
    r = np.sqrt(np.sum((u - v) ** 2, axis=1))
    return matern_of_distance(model.nu, r)


def cov_matrix(model: CovarianceModel, grid: Grid, jitter: float = 1e-10) -> np.ndarray:
    """Dense ``G x G`` covariance on the grid plus ``jitter`` on the diagonal.

    This is the only intentionally quadratic-in-``G`` object of the simulator.
    The upper triangle is computed and mirrored, so the result is exactly
    symmetric.
    """
    if jitter < 0:
        raise DomainError("jitter must be non-negative")
    pts = grid.points()
    full = _kernel_block(model, pts, pts)
    upper = np.triu(full)
    out = upper + np.triu(upper, 1).T
    out[np.diag_indices_from(out)] += jitter
    return out


def cholesky_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "covariance matrix is not numerically positive definite; increase the jitter"
        ) from None


def stream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream labelled ``key`` under ``seed``.

    Streams used by the simulator are ``(replication, t)`` with ``t = 0`` for
    the initial value and ``t = 1 .. burn_in + n`` for the innovations.
    """
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample_gaussian_field(chol: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One centred Gaussian field ``chol @ z`` with ``z`` standard normal.

    Same arithmetic as the batched path in :func:`simulate_far1`.
    """
    z = rng.standard_normal(chol.shape[0])
    return (z[None, :] @ chol.T)[0]


@dataclass(frozen=True)
class Far1Config:
    model: CovarianceModel
    gamma: float
    n: int
    grid: Grid
    seed: int
    burn_in: int = 100
    replication: int = 0
    jitter: float = 1e-10

    def __post_init__(self):
        if not (abs(self.gamma) < 1):
            raise ConfigError(f"gamma must satisfy |gamma| < 1, got {self.gamma!r}")
        if self.burn_in < 0:
            raise ConfigError("burn_in must be >= 0")
        if self.n < 1:
            raise ConfigError("n must be >= 1")


@dataclass
class _FactorCache:
    store: dict = field(default_factory=dict)

    def get(self, model, grid, jitter):
        key = (model, grid, jitter)
        if key not in self.store:
            self.store[key] = cholesky_factor(cov_matrix(model, grid, jitter))
        return self.store[key]


_factors = _FactorCache()


def simulate_far1(cfg: Far1Config, chol: np.ndarray | None = None) -> FieldSeries:
    """Simulate ``X_t = gamma X_{t-1} + Z_t`` on the grid and drop the burn-in.

    ``X_0`` has the law of ``Z_1``. The Cholesky factor of the innovation
    covariance is cached per ``(model, grid, jitter)`` unless supplied.
    """
    if chol is None:
        chol = _factors.get(cfg.model, cfg.grid, cfg.jitter)
    g = cfg.grid.size
    steps = cfg.burn_in + cfg.n
    normals = np.stack(
        [stream(cfg.seed, cfg.replication, t).standard_normal(g) for t in range(steps + 1)]
    )
    fields = normals @ chol.T
    out = np.empty((cfg.n, g))
    x = fields[0]
    for t in range(1, steps + 1):
        x = cfg.gamma * x + fields[t]
        if t > cfg.burn_in:
            out[t - cfg.burn_in - 1] = x
    return FieldSeries(cfg.grid, out)
