import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specden.covariance import BrownianSheet, IntegratedBrownianSheet, Matern, cov_kernel
from specden.errors import ConfigError, DegenerateTruthError, DomainError
from specden.evaluation import Far1Truth, benchmark, mc_draws, relative_error, true_spectral_eval
from specden.grid import FieldSeries, Grid
from specden.lagwindow import emp_full_kernels
from specden.memory import track


class Scaled:
    def __init__(self, base, factor):
        self.base, self.factor = base, factor

    def evaluate(self, theta, us, vs):
        return self.factor * self.base.evaluate(theta, us, vs)


class Zero:
    def evaluate(self, theta, us, vs):
        return np.zeros(len(us), dtype=complex)


TRUTH = Far1Truth(BrownianSheet(), 0.5)


def test_truth_white_noise_constant():
    t = Far1Truth(Matern(0.5), 0.0)
    u, v = [0.2, 0.4], [0.7, 0.1]
    c0 = cov_kernel(Matern(0.5), u, v)
    for theta in (-3.0, 0.0, 1.0):
        ev = true_spectral_eval(t, theta, u, v)
        assert ev.value == pytest.approx(c0 / (2 * math.pi), rel=1e-15)
        assert ev.quadspectrum == 0.0


def test_truth_gamma_half_endpoints():
    u, v = [0.3], [0.6]
    c0 = cov_kernel(BrownianSheet(), u, v)
    assert true_spectral_eval(TRUTH, 0.0, u, v).cospectrum == pytest.approx(2 * c0 / math.pi, rel=1e-14)
    assert true_spectral_eval(TRUTH, math.pi, u, v).cospectrum == pytest.approx(c0 / (4.5 * math.pi), rel=1e-14)


@given(st.floats(-math.pi, math.pi), st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_truth_even_and_symmetric(theta, c):
    t = Far1Truth(IntegratedBrownianSheet(), -0.3)
    u, v = c[:2], c[2:]
    a = true_spectral_eval(t, theta, u, v).value
    assert a == true_spectral_eval(t, -theta, u, v).value
    assert a == true_spectral_eval(t, theta, v, u).value


def test_truth_gamma_validation():
    with pytest.raises(ConfigError):
        Far1Truth(BrownianSheet(), -1.0)


def test_relative_error_trivial_cases():
    assert relative_error(TRUTH, TRUTH, 1, 5, 200, seed=1).relative_error == 0.0
    assert relative_error(Scaled(TRUTH, 2.0), TRUTH, 1, 5, 200).relative_error == pytest.approx(1.0, rel=1e-14)
    assert relative_error(Zero(), TRUTH, 1, 5, 200).relative_error == 1.0


def test_relative_error_matches_hand_loop():
    est = Scaled(Far1Truth(BrownianSheet(), 0.3), 1.0)
    rep = relative_error(est, TRUTH, 2, 4, 50, seed=6)
    num = den = 0.0
    for theta, us, vs in mc_draws(2, 4, 50, 6):
        f = [TRUTH.evaluate(theta, us[j:j+1], vs[j:j+1])[0] for j in range(50)]
        g = [est.evaluate(theta, us[j:j+1], vs[j:j+1])[0] for j in range(50)]
        num += math.sqrt(sum(abs(a - b) ** 2 for a, b in zip(f, g)) / 50) / 4
        den += math.sqrt(sum(abs(a) ** 2 for a in f) / 50) / 4
    assert rep.relative_error == pytest.approx(num / den, rel=1e-12)


@settings(max_examples=20)
@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_relative_error_scale_invariant(c, seed):
    est = Far1Truth(BrownianSheet(), 0.2)
    a = relative_error(est, TRUTH, 1, 3, 64, seed).relative_error
    b = relative_error(Scaled(est, c), Scaled(TRUTH, c), 1, 3, 64, seed).relative_error
    assert b == pytest.approx(a, rel=1e-12)


def test_relative_error_deterministic_and_draws():
    a = relative_error(Far1Truth(BrownianSheet(), 0.1), TRUTH, 1, 3, 30, 4)
    b = relative_error(Far1Truth(BrownianSheet(), 0.1), TRUTH, 1, 3, 30, 4)
    assert a == b
    draws = list(mc_draws(3, 2, 10, 0))
    assert all(-math.pi <= th <= math.pi and u.shape == (10, 3) for th, u, _ in draws)
    # frequency i draws do not depend on I
    assert np.array_equal(list(mc_draws(1, 5, 10, 0))[1][1], list(mc_draws(1, 2, 10, 0))[1][1])


def test_relative_error_degenerate_and_domain():
    with pytest.raises(DegenerateTruthError):
        relative_error(Zero(), Zero(), 1, 2, 5)
    with pytest.raises(DomainError):
        relative_error(TRUTH, TRUTH, 1, 0, 5)


def test_report_json():
    rep = relative_error(Zero(), TRUTH, 1, 2, 5, seed=3)
    doc = json.loads(rep.to_json())
    assert doc["relative_error"] == 1.0 and doc["I"] == 2 and doc["J"] == 5 and doc["seed"] == 3


def test_benchmark_noop():
    rep, out = benchmark()
    assert out is None
    assert rep.peak_aux_bytes == 0
    assert rep.total_seconds < 0.05
    assert rep.total_seconds == pytest.approx(rep.fit_seconds + rep.eval_seconds, abs=1e-6)


def test_benchmark_counts_tracked_buffers():
    def fit():
        return track(np.zeros(1000))

    def evaluate(obj):
        tmp = track(np.zeros(500))
        time.sleep(0.01)
        return float(tmp.sum() + obj.sum())

    rep, out = benchmark(fit, evaluate)
    assert out == 0.0
    assert rep.fit_peak_bytes == 8000
    assert rep.eval_peak_bytes == 12000
    assert rep.peak_aux_bytes == 12000
    assert rep.eval_seconds >= 0.01


def _full_kernel_peak(k):
    g = Grid(2, k)
    s = FieldSeries(g, np.random.default_rng(0).standard_normal((6, g.size)))
    rep, _ = benchmark(lambda: emp_full_kernels(s, 2))
    return rep.peak_aux_bytes


def test_full_kernel_peak_grows_quartically():
    assert _full_kernel_peak(8) / _full_kernel_peak(4) >= 8
