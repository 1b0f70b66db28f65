"""Batches of small sigmoid networks ``R^d -> R`` with hand-written backprop.

A :class:`NetworkBank` holds ``nb`` networks of identical shape, one per
leading index of every parameter array, and evaluates all of them at a
shared set of points. Three architectures are supported:

``shallow``
    ``g(u) = sum_r c_r sigmoid(w_r . u + b_r)``.
``deep-shared``
    ``depth - 1`` shared hidden layers, then ``R`` sigmoid heads summed with
    weights ``c_r``.
``deep``
    ``R`` independent towers of ``depth - 1`` hidden layers, each ending in a
    single sigmoid unit scaled by ``c_r``; the towers are summed.

Parameter order (used for flattening and the model file): ``W1, B1, ...,
WJ, BJ, w, b, c``; every array has leading shape ``lead`` (the network index
shape), followed by the per-network shape. For ``deep`` the tower index
``R`` comes right after ``lead``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..memory import track

ARCHES = ("shallow", "deep-shared", "deep")


def sigmoid(t, out=None):
    """Logistic function via ``(1 + tanh(t/2)) / 2``; ``out`` may alias ``t``."""
    if out is None:
        out = np.empty(np.shape(t))
    np.multiply(t, 0.5, out=out)
    np.tanh(out, out=out)
    out += 1.0
    out *= 0.5
    return out


@dataclass(frozen=True)
class Architecture:
    kind: str = "deep-shared"
    depth: int = 4
    width: int = 20
    heads: int | None = None

    def __post_init__(self):
        if self.kind not in ARCHES:
            raise ConfigError(f"unknown architecture {self.kind!r}; use one of {ARCHES}")
        if self.depth < 1 or self.width < 1:
            raise ConfigError("depth and width must be positive")
        if self.heads is not None and self.heads < 1:
            raise ConfigError("heads must be positive")

    @property
    def n_heads(self) -> int:
        return self.width if self.heads is None else self.heads

    @property
    def n_hidden(self) -> int:
        """Number of hidden layers before the sigmoid head layer."""
        return 0 if self.kind == "shallow" else self.depth - 1

    def param_shapes(self, dim: int) -> list:
        """``(name, per-network shape)`` in canonical order."""
        shapes = []
        fan = dim
        tower = (self.n_heads,) if self.kind == "deep" else ()
        for j in range(1, self.n_hidden + 1):
            shapes.append((f"W{j}", tower + (self.width, fan)))
            shapes.append((f"B{j}", tower + (self.width,)))
            fan = self.width
        if self.kind == "deep":
            shapes += [("w", tower + (fan,)), ("b", tower), ("c", tower)]
        else:
            r = self.n_heads
            shapes += [("w", (r, fan)), ("b", (r,)), ("c", (r,))]
        return shapes


class NetworkBank:
    """``lead``-shaped collection of networks with parameters in ``params``."""

    def __init__(self, arch: Architecture, dim: int, lead: tuple, params: dict):
        self.arch = arch
        self.dim = int(dim)
        self.lead = tuple(lead)
        self.params = params
        for name, shape in arch.param_shapes(dim):
            want = self.lead + shape
            if params[name].shape != want:
                raise ConfigError(f"parameter {name} has shape {params[name].shape}, expected {want}")

    @property
    def count(self) -> int:
        return int(np.prod(self.lead))

    @classmethod
    def initialize(cls, arch: Architecture, dim: int, lead: tuple, rng: np.random.Generator, scale=1.0):
        """Symmetric uniform init with bound ``scale / sqrt(fan_in)``."""
        params = {}
        shapes = dict(arch.param_shapes(dim))
        for name, shape in arch.param_shapes(dim):
            if name.startswith("W") or name == "w":
                fan_in = shape[-1]
            elif name.startswith("B"):
                fan_in = shapes["W" + name[1:]][-1]
            elif name == "b":
                fan_in = shapes["w"][-1]
            else:
                fan_in = arch.n_heads
            bound = scale / math.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=tuple(lead) + shape)
        return cls(arch, dim, lead, params)

    # -- flat (nb, ...) views used by forward/backward --------------------------------

    def _flat(self):
        nb = self.count
        out = {}
        for name, shape in self.arch.param_shapes(self.dim):
            p = self.params[name].reshape((nb,) + shape)
            if self.arch.kind == "deep":
                r = self.arch.n_heads
                p = p.reshape((nb * r,) + shape[1:])
            out[name] = p
        return out

    def forward(self, pts: np.ndarray, keep: bool = False):
        """Evaluate every network at ``pts`` (shape ``(P, d)``).

        Returns ``out`` of shape ``lead + (P,)`` and, when ``keep``, the
        activation cache for :meth:`backward`.
        """
        pts = np.asarray(pts, dtype=np.float64)
        fp = self._flat()
        acts = []
        a = None
        for j in range(1, self.arch.n_hidden + 1):
            w, bias = fp[f"W{j}"], fp[f"B{j}"]
            if a is None:
                z = np.einsum("bkd,pd->bkp", w, pts, optimize=False)
            else:
                z = np.matmul(w, a)
            z += bias[:, :, None]
            a = track(sigmoid(z, out=z))
            del z
            acts.append(a)
        w, bias, c = fp["w"], fp["b"], fp["c"]
        if self.arch.kind == "deep":
            # towers: one head unit each
            if a is None:
                zh = pts @ w.T
                zh = zh.T
            else:
                zh = np.einsum("bk,bkp->bp", w, a, optimize=False)
            zh += bias[:, None]
            sh = track(sigmoid(zh, out=zh))
            tower_out = c[:, None] * sh
            out = tower_out.reshape((self.count, self.arch.n_heads, -1)).sum(axis=1)
        else:
            if a is None:
                zh = np.einsum("brd,pd->brp", w, pts, optimize=False)
            else:
                zh = np.matmul(w, a)
            zh += bias[:, :, None]
            sh = track(sigmoid(zh, out=zh))
            out = np.einsum("br,brp->bp", c, sh, optimize=False)
        out = track(out.reshape(self.lead + (pts.shape[0],)))
        if keep:
            return out, (pts, acts, sh)
        return out

    def evaluate(self, pts: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Forward pass in point chunks (no cache); shape ``lead + (P,)``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        parts = [self.forward(pts[i : i + chunk]) for i in range(0, pts.shape[0], chunk)]
        return np.concatenate(parts, axis=-1) if parts else np.zeros(self.lead + (0,))

    def backward(self, dout: np.ndarray, cache) -> dict:
        """Gradients of ``sum(dout * out)`` with respect to every parameter."""
        pts, acts, sh = cache
        fp = self._flat()
        nb = self.count
        grads = {}
        dout = dout.reshape(nb, -1)
        if self.arch.kind == "deep":
            r = self.arch.n_heads
            dtow = np.repeat(dout, r, axis=0)
            c = fp["c"]
            grads["c"] = np.einsum("bp,bp->b", dtow, sh, optimize=False)
            dzh = dtow * c[:, None] * sh * (1.0 - sh)
            grads["b"] = dzh.sum(axis=1)
            if acts:
                a_last = acts[-1]
                grads["w"] = np.einsum("bp,bkp->bk", dzh, a_last, optimize=False)
                da = fp["w"][:, :, None] * dzh[:, None, :]
            else:
                grads["w"] = dzh @ pts
                da = None
        else:
            c = fp["c"]
            grads["c"] = np.einsum("bp,brp->br", dout, sh, optimize=False)
            dzh = c[:, :, None] * dout[:, None, :] * sh * (1.0 - sh)
            grads["b"] = dzh.sum(axis=2)
            if acts:
                a_last = acts[-1]
                grads["w"] = np.matmul(dzh, a_last.transpose(0, 2, 1))
                da = np.matmul(fp["w"].transpose(0, 2, 1), dzh)
            else:
                grads["w"] = np.einsum("brp,pd->brd", dzh, pts, optimize=False)
                da = None
        for j in range(self.arch.n_hidden, 0, -1):
            a = acts[j - 1]
            dz = da * a * (1.0 - a)
            grads[f"B{j}"] = dz.sum(axis=2)
            if j > 1:
                grads[f"W{j}"] = np.matmul(dz, acts[j - 2].transpose(0, 2, 1))
                da = np.matmul(fp[f"W{j}"].transpose(0, 2, 1), dz)
            else:
                grads[f"W{j}"] = np.einsum("bkp,pd->bkd", dz, pts, optimize=False)
        out = {}
        for name, shape in self.arch.param_shapes(self.dim):
            out[name] = grads[name].reshape(self.lead + shape)
        return out


def mlp_eval(bank: NetworkBank, index: tuple, u) -> float:
    """Value of network ``bank[index]`` at the single point ``u``."""
    pts = np.asarray(u, dtype=np.float64).reshape(1, -1)
    return float(bank.forward(pts)[tuple(index) + (0,)])
