"""Full-batch Adam training of the neural random-field model."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DivergenceError
from ..grid import FieldSeries
from ..lagwindow import WindowKernel
from .loss import loss, loss_and_grad
from .mlp import Architecture
from .model import SpectralNNModel


@dataclass(frozen=True)
class TrainConfig:
    q: int = 20
    window: WindowKernel = WindowKernel.PARZEN
    freq_points: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    sqrt_eps: float = 1e-12
    seed: int = 0
    init_scale: float = 1.0
    xi_scale: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "window", WindowKernel.parse(self.window))
        if self.q < 1:
            raise ConfigError("q must be >= 1")
        if self.freq_points < 2:
            raise ConfigError("freq_points must be >= 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")


@dataclass(frozen=True)
class Hyper:
    m: int = 10
    lags: int = 10
    arch: Architecture = field(default_factory=Architecture)

    def __post_init__(self):
        if self.m < 1 or self.lags < 0:
            raise ConfigError("need M >= 1 and L >= 0")


@dataclass
class TrainResult:
    model: SpectralNNModel
    history: list  # (epoch, loss, seconds since start)
    best_loss: float
    best_epoch: int
    initial_loss: float


def flatten_grads(model: SpectralNNModel, grads: dict) -> np.ndarray:
    return np.concatenate([np.asarray(grads[name]).ravel() for name in model.param_names()])


def train(data: FieldSeries, hyper: Hyper | None = None, cfg: TrainConfig | None = None,
          callback=None) -> TrainResult:
    """Fit the model to ``data`` and return the lowest-loss parameter state.

    ``history`` has one row per epoch holding the loss of the parameters
    entering that epoch. The state after the last update is also scored, so
    the returned loss never exceeds the initial one.
    """
    hyper = hyper or Hyper()
    cfg = cfg or TrainConfig()
    model = SpectralNNModel.initialize(
        data.grid, data.n, hyper.m, hyper.lags, hyper.arch, seed=cfg.seed,
        xi_scale=cfg.xi_scale, init_scale=cfg.init_scale,
    )
    theta = model.get_flat()
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    best = (np.inf, 0, theta.copy())
    history = []
    start = time.perf_counter()
    initial = None
    for epoch in range(1, cfg.epochs + 1):
        model.set_flat(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            value, grads = loss_and_grad(model, data, cfg)
            g = flatten_grads(model, grads)
        if not np.isfinite(value) or not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite loss or gradient at epoch {epoch}", epoch=epoch)
        if initial is None:
            initial = value
        history.append((epoch, value, time.perf_counter() - start))
        if value < best[0]:
            best = (value, epoch, theta.copy())
        if callback is not None:
            callback(epoch, value)
        m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g
        m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g * g
        mhat = m1 / (1.0 - cfg.beta1**epoch)
        vhat = m2 / (1.0 - cfg.beta2**epoch)
        theta = theta - cfg.lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)
    model.set_flat(theta)
    with np.errstate(over="ignore", invalid="ignore"):
        final = loss(model, data, cfg)
    if not np.isfinite(final):
        raise DivergenceError(f"non-finite loss after epoch {cfg.epochs}", epoch=cfg.epochs)
    if final < best[0]:
        best = (final, cfg.epochs + 1, theta.copy())
    model.set_flat(best[2])
    model.meta.update({
        "seed": cfg.seed,
        "q": cfg.q,
        "window": cfg.window.value,
        "epochs": cfg.epochs,
        "lr": cfg.lr,
        "freq_points": cfg.freq_points,
        "best_loss": best[0],
        "best_epoch": best[1],
        "data_digest": data.digest,
    })
    return TrainResult(model, history, best[0], best[1], initial)
