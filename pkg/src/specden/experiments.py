"""Config-driven pipeline pieces shared by the CLI and the replication tables."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import RunConfig
from .covariance import Far1Config, model_from_name, simulate_far1
from .errors import ConfigError, MemoryCapError
from .evaluation import Far1Truth, benchmark, relative_error
from .grid import FieldSeries, Grid
from .lagwindow import EmpiricalEstimator, emp_full_kernels
from .nn.mlp import Architecture
from .nn.model import SpectralNNEstimator, SpectralNNModel
from .nn.train import Hyper, TrainConfig, train


def covariance_model(cfg: RunConfig):
    return model_from_name(cfg.data.model, cfg.data.nu)


def grid_of(cfg: RunConfig) -> Grid:
    return Grid(cfg.data.d, cfg.data.k)


def truth_of(cfg: RunConfig) -> Far1Truth:
    return Far1Truth(covariance_model(cfg), cfg.data.gamma)


def simulate(cfg: RunConfig, replication: int = 0) -> FieldSeries:
    d = cfg.data
    return simulate_far1(Far1Config(
        covariance_model(cfg), d.gamma, d.n, grid_of(cfg), d.seed,
        burn_in=d.burn_in, replication=replication, jitter=d.jitter,
    ))


def train_config(cfg: RunConfig) -> TrainConfig:
    e = cfg.estimator
    return TrainConfig(q=e.q, window=e.window, freq_points=e.freq_points, lr=e.lr, epochs=e.epochs,
                       seed=e.seed, init_scale=e.init_scale, xi_scale=e.xi_scale)


def hyper(cfg: RunConfig) -> Hyper:
    e = cfg.estimator
    return Hyper(e.M, e.L, Architecture(e.arch, e.depth, e.width, e.heads))


def fit_nn(cfg: RunConfig, series: FieldSeries):
    return train(series, hyper(cfg), train_config(cfg))


def check_model(cfg: RunConfig, model: SpectralNNModel, series: FieldSeries) -> None:
    e = cfg.estimator
    if model.grid != series.grid or model.n != series.n:
        raise ConfigError("model file was fitted on a different grid or sample size than the series")
    want = Architecture(e.arch, e.depth, e.width, e.heads)
    got = model.arch
    if (model.m, model.lags) != (e.M, e.L) or (got.kind, got.depth, got.width, got.n_heads) != (
        want.kind, want.depth, want.width, want.n_heads
    ):
        raise ConfigError("model file hyperparameters do not match the estimator section of the config")


def estimator_for(cfg: RunConfig, series: FieldSeries, model: SpectralNNModel | None = None):
    e = cfg.estimator
    if e.kind == "empirical":
        return EmpiricalEstimator(series, e.window, e.q)
    if e.kind == "truth":
        return truth_of(cfg)
    if model is None:
        raise ConfigError("spectral-nn evaluation needs a fitted model file")
    check_model(cfg, model, series)
    return SpectralNNEstimator(model, e.window, e.q)


def evaluate(cfg: RunConfig, estimator):
    ev = cfg.evaluation
    return relative_error(estimator, truth_of(cfg), cfg.data.d, ev.I, ev.J, ev.seed)


def run_replication(cfg: RunConfig, replication: int) -> dict:
    """Simulate, fit and score one replication; returns a table row."""
    series = simulate(cfg, replication)
    model = None
    if cfg.estimator.kind == "spectral-nn":
        model = fit_nn(cfg, series).model
    rep = evaluate(cfg, estimator_for(cfg, series, model))
    return {"replication": replication, "relative_error": rep.relative_error}


def worker_count() -> int:
    raw = os.environ.get("SPECDEN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SPECDEN_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("SPECDEN_THREADS must be >= 1")
    return n


def run_replications(cfg: RunConfig, reps: int) -> list:
    """Rows for replications ``0 .. reps-1`` in order, fanned out over worker processes."""
    workers = min(worker_count(), reps)
    if workers <= 1:
        return [run_replication(cfg, r) for r in range(reps)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_replication, [cfg] * reps, range(reps)))


def summarize(errors) -> tuple:
    """Mean and standard error over replications."""
    arr = np.asarray(errors, dtype=np.float64)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else float("nan")
    return mean, se


def setting_label(cfg: RunConfig) -> str:
    d = cfg.data
    model = d.model if d.model != "matern" else f"matern(nu={d.nu:g})"
    return f"{model} d={d.d} K={d.k} N={d.n} gamma={d.gamma:g}"


def bench_run(cfg: RunConfig, kind: str, series: FieldSeries, force: bool = False) -> dict:
    """Timings and peak tracked bytes for one estimator on ``series``.

    The empirical estimator is benchmarked in full-kernel mode, i.e. it
    materialises every lag kernel on the grid; it is refused with status
    ``CAP`` when that exceeds the configured memory cap.
    """
    e = cfg.estimator
    cap = cfg.limits.memory_cap_bytes
    sub = cfg.model_copy(update={"estimator": e.model_copy(update={"kind": kind})})
    if kind == "empirical":
        def fit():
            emp_full_kernels(series, e.q, memory_cap=cap, force=force)
            return EmpiricalEstimator(series, e.window, e.q)
    elif kind == "spectral-nn":
        def fit():
            return SpectralNNEstimator(fit_nn(sub, series).model, e.window, e.q)
    else:
        raise ConfigError(f"cannot benchmark estimator kind {kind!r}")
    try:
        report, err = benchmark(fit, lambda est: evaluate(sub, est))
    except MemoryCapError as exc:
        return {"estimator": kind, "status": "CAP", "message": str(exc), "estimate_bytes": exc.estimate_bytes}
    return {
        "estimator": kind,
        "status": "OK",
        "fit_seconds": report.fit_seconds,
        "eval_seconds": report.eval_seconds,
        "total_seconds": report.total_seconds,
        "peak_aux_bytes": report.peak_aux_bytes,
        "fit_peak_bytes": report.fit_peak_bytes,
        "eval_peak_bytes": report.eval_peak_bytes,
        "relative_error": err.relative_error,
    }
