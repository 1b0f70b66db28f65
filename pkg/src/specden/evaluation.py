"""FAR(1) ground truth, Monte-Carlo relative error and benchmark timing."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .covariance import CovarianceModel, cov_kernel_pairs, stream
from .errors import ConfigError, DegenerateTruthError, DomainError
from .lagwindow import SpectralEval
from .memory import metered


@dataclass(frozen=True)
class Far1Truth:
    """Spectral density of ``X_t = gamma X_{t-1} + Z_t`` with innovation kernel ``c0``."""

    model: CovarianceModel
    gamma: float

    kind = "truth"

    def __post_init__(self):
        if not abs(self.gamma) < 1:
            raise ConfigError(f"gamma must satisfy |gamma| < 1, got {self.gamma!r}")

    def scale(self, theta) -> np.ndarray | float:
        """``1 / (2 pi |1 - gamma e^{-i theta}|^2)``."""
        g = self.gamma
        return 1.0 / (2.0 * math.pi * (1.0 + g * g - 2.0 * g * np.cos(theta)))

    def evaluate(self, theta: float, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        c0 = cov_kernel_pairs(self.model, np.atleast_2d(us), np.atleast_2d(vs))
        return (c0 * self.scale(theta)).astype(np.complex128)


def true_spectral_eval(truth: Far1Truth, theta: float, u, v) -> SpectralEval:
    val = truth.evaluate(theta, np.atleast_2d(u), np.atleast_2d(v))[0].real
    return SpectralEval(float(theta), tuple(np.ravel(u).tolist()), tuple(np.ravel(v).tolist()), float(val), 0.0)


@dataclass(frozen=True)
class ErrorReport:
    relative_error: float
    I: int
    J: int
    seed: int
    numerator: float
    denominator: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def mc_draws(d: int, i_count: int, j_count: int, seed: int):
    """Yield ``(theta_i, u_i, v_i)`` with ``u_i, v_i`` of shape ``(J, d)``.

    Frequency ``i`` uses its own Philox stream, so draws do not depend on how
    many frequencies are requested.
    """
    for i in range(i_count):
        rng = stream(seed, 1 << 20, i)
        theta = rng.uniform(-math.pi, math.pi)
        uv = rng.uniform(0.0, 1.0, size=(j_count, 2 * d))
        yield theta, uv[:, :d], uv[:, d:]


def relative_error(estimator, truth, d: int, i_count: int = 100, j_count: int = 10000,
                   seed: int = 0) -> ErrorReport:
    """Monte-Carlo relative integrated error of ``estimator`` against ``truth``.

    Both arguments expose ``evaluate(theta, us, vs) -> complex array``.
    """
    if i_count < 1 or j_count < 1:
        raise DomainError("I and J must be >= 1")
    num = np.empty(i_count)
    den = np.empty(i_count)
    for i, (theta, us, vs) in enumerate(mc_draws(d, i_count, j_count, seed)):
        f = np.asarray(truth.evaluate(theta, us, vs))
        fhat = np.asarray(estimator.evaluate(theta, us, vs))
        num[i] = math.sqrt(np.mean(np.abs(f - fhat) ** 2))
        den[i] = math.sqrt(np.mean(np.abs(f) ** 2))
    numerator = float(np.mean(num))
    denominator = float(np.mean(den))
    if denominator == 0.0:
        raise DegenerateTruthError("truth vanishes at every Monte-Carlo draw; relative error undefined")
    return ErrorReport(numerator / denominator, i_count, j_count, int(seed), numerator, denominator)


@dataclass(frozen=True)
class BenchReport:
    fit_seconds: float
    eval_seconds: float
    total_seconds: float
    peak_aux_bytes: int
    fit_peak_bytes: int = 0
    eval_peak_bytes: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def benchmark(fit=None, evaluate=None):
    """Time a fit phase and an evaluate phase and record peak tracked bytes.

    ``fit()`` returns an object passed to ``evaluate(obj)``; either phase may
    be omitted. Returns ``(BenchReport, result of evaluate)``. Peaks are
    recorded per phase; buffers still held by the fitted object count toward
    the evaluate phase as well.
    """
    with metered() as meter:
        t0 = time.perf_counter()
        fitted = fit() if fit is not None else None
        t1 = time.perf_counter()
        fit_peak = meter.peak_bytes
        meter.reset_peak()
        result = evaluate(fitted) if evaluate is not None else None
        t2 = time.perf_counter()
        eval_peak = meter.peak_bytes
        del fitted
    report = BenchReport(t1 - t0, t2 - t1, t2 - t0, int(max(fit_peak, eval_peak)), int(fit_peak), int(eval_peak))
    return report, result


def rows_to_csv(rows: list, header: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in header})
    return buf.getvalue()
