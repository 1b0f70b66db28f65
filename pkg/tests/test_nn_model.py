import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import dense_hs_sq, dense_spectral, naive_field_values
from specden.errors import DimensionError, ParseError, TruncatedFileError
from specden.grid import FieldSeries, Grid
from specden.lagwindow import emp_autocov_eval, lag_weights
from specden.nn.mlp import Architecture, NetworkBank
from specden.nn.model import (
    SpectralNNEstimator,
    SpectralNNModel,
    fitted_autocov_eval,
    fitted_spectral_eval,
    load_model,
    magnitude_curve,
    model_field_values,
    model_from_bytes,
    model_to_bytes,
    save_model,
    spectral_eigendecomposition,
)

SMALL = Architecture("deep-shared", 2, 4, heads=3)


def small_model(seed=0, grid=Grid(1, 6), n=7, m=2, lags=1, arch=SMALL, xi_scale=0.7):
    return SpectralNNModel.initialize(grid, n, m, lags, arch, seed=seed, xi_scale=xi_scale, init_scale=2.0)


def zero_model(**kw):
    model = small_model(**kw)
    model.xi[:] = 0.0
    return model


def test_xi_shape_validation():
    model = small_model()
    with pytest.raises(DimensionError):
        SpectralNNModel(model.m, model.lags, model.n, model.grid, model.bank, np.zeros((2, 3)))


def test_field_values_zero_xi():
    assert not np.any(model_field_values(zero_model()))


def test_field_values_single_term():
    model = small_model(m=1, lags=0)
    model.xi[:] = 1.0
    g = model.bank.evaluate(model.grid.points())[0, 0]
    np.testing.assert_allclose(model_field_values(model), np.tile(g, (model.n, 1)), rtol=0, atol=1e-15)


@pytest.mark.parametrize("arch", [SMALL, Architecture("deep", 2, 3, heads=2), Architecture("shallow", 1, 3)],
                         ids=lambda a: a.kind)
def test_field_values_match_naive_loops(arch):
    model = small_model(seed=3, grid=Grid(2, 3), n=5, m=2, lags=2, arch=arch)
    np.testing.assert_allclose(model_field_values(model), naive_field_values(model), rtol=0, atol=1e-12)


def test_fitted_autocov_zero_model():
    model = zero_model()
    assert fitted_autocov_eval(model, 1, [0.2], [0.4]) == 0.0


def test_fitted_autocov_identical_terms():
    model = small_model(m=1, lags=0, n=9)
    model.xi[:] = 1.0
    u, v = [0.13], [0.77]
    gu = model.bank.evaluate(np.array([u]))[0, 0, 0]
    gv = model.bank.evaluate(np.array([v]))[0, 0, 0]
    for h in (-4, 0, 3, 8, 9):
        want = (9 - abs(h)) / 9 * gu * gv if abs(h) < 9 else 0.0
        assert fitted_autocov_eval(model, h, u, v) == pytest.approx(want, rel=1e-13, abs=1e-16)


def test_fitted_autocov_matches_grid_empirical():
    model = small_model(seed=5, grid=Grid(1, 5))
    series = FieldSeries(model.grid, model_field_values(model))
    pts = model.grid.points()
    for h in (-2, 0, 1, 3):
        for a in range(5):
            for b in range(5):
                assert fitted_autocov_eval(model, h, pts[a], pts[b]) == pytest.approx(
                    emp_autocov_eval(series, h, pts[a], pts[b]), abs=1e-12)


def test_fitted_spectral_zero_model():
    ev = fitted_spectral_eval(zero_model(), "parzen", 3, 0.5, [0.1], [0.3])
    assert ev.value == 0


def test_fitted_spectral_reassembly():
    model = small_model(seed=2)
    u, v, q, theta = [0.21], [0.64], 4, 1.3
    w = lag_weights("parzen", q)
    want = sum(w[i] * fitted_autocov_eval(model, h, u, v) * np.exp(-1j * h * theta)
               for i, h in enumerate(range(-q, q + 1))) / (2 * math.pi)
    got = fitted_spectral_eval(model, "parzen", q, theta, u, v).value
    assert abs(got - want) < 1e-12


@settings(max_examples=25)
@given(seed=st.integers(0, 1000), theta=st.floats(-math.pi, math.pi))
def test_fitted_symmetries(seed, theta):
    model = small_model(seed=seed, grid=Grid(2, 3))
    est = SpectralNNEstimator(model, "bartlett", 3)
    r = np.random.default_rng(seed)
    us, vs = r.uniform(0, 1, (2, 5, 2))
    f = est.evaluate(theta, us, vs)
    np.testing.assert_allclose(f, np.conj(est.evaluate(theta, vs, us)), atol=1e-12, rtol=0)
    np.testing.assert_allclose(est.evaluate(-theta, us, vs), np.conj(f), atol=1e-12, rtol=0)


def test_eigen_zero_model():
    ev = spectral_eigendecomposition(zero_model(), "parzen", 3, 0.2)
    assert np.all(ev == 0)


@pytest.mark.parametrize("theta", [-2.0, 0.0, 0.7, math.pi])
def test_eigen_trace_identity(theta):
    model = small_model(seed=4, grid=Grid(1, 8))
    ev = spectral_eigendecomposition(model, "parzen", 3, theta)
    assert np.all(np.diff(ev) <= 0)
    dense = dense_spectral(model_field_values(model), "parzen", 3, theta)
    trace = model.grid.quad_weight * np.trace(dense).real
    assert ev.sum() == pytest.approx(trace, rel=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_eigen_parzen_nonnegative(seed):
    model = small_model(seed=seed, grid=Grid(1, 10), n=12, m=2, lags=2)
    for theta in np.linspace(-math.pi, math.pi, 8):
        ev = spectral_eigendecomposition(model, "parzen", 4, theta)
        assert ev.min() >= -1e-8 * ev.max()


def test_eigen_rank_deficient_gram():
    # all networks identical -> Gram of rank one
    model = small_model(seed=1, m=2, lags=1)
    for k, v in model.bank.params.items():
        v[:] = v[0, 0]
    ev = spectral_eigendecomposition(model, "parzen", 3, 0.4)
    assert np.count_nonzero(ev) <= 1
    dense = dense_spectral(model_field_values(model), "parzen", 3, 0.4)
    assert ev.sum() == pytest.approx(model.grid.quad_weight * np.trace(dense).real, rel=1e-8)


def test_magnitude_zero_model():
    assert all(v == 0 for _, v in magnitude_curve(zero_model(), "parzen", 3, [0.0, 1.0]))


def test_magnitude_matches_dense_oracle():
    model = small_model(seed=7, grid=Grid(2, 3), n=8, m=2, lags=2)
    y = model_field_values(model)
    thetas = np.linspace(-math.pi, math.pi, 7)
    curve = magnitude_curve(model, "bartlett", 3, thetas)
    for theta, norm in curve:
        want = math.sqrt(dense_hs_sq(dense_spectral(y, "bartlett", 3, theta), model.grid.quad_weight))
        assert norm == pytest.approx(want, abs=1e-8, rel=1e-8)


def test_magnitude_even_in_theta():
    model = small_model(seed=9)
    thetas = np.array([0.3, 1.1, 2.9])
    pos = magnitude_curve(model, "parzen", 3, thetas)
    neg = magnitude_curve(model, "parzen", 3, -thetas)
    for (_, a), (_, b) in zip(pos, neg):
        assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("arch", [SMALL, Architecture("deep", 2, 3, heads=2), Architecture("shallow", 1, 3)],
                         ids=lambda a: a.kind)
def test_model_file_roundtrip(arch, tmp_path):
    model = small_model(seed=11, arch=arch, grid=Grid(2, 3))
    model.meta["note"] = "x"
    path = save_model(model, tmp_path / "m.specnn")
    back = load_model(path)
    assert back.get_flat().tobytes() == model.get_flat().tobytes()
    assert back.arch.kind == arch.kind and back.grid == model.grid and back.meta == model.meta
    assert model_to_bytes(back) == model_to_bytes(model)


def test_model_file_errors():
    buf = model_to_bytes(small_model())
    with pytest.raises(ParseError):
        model_from_bytes(b"XXXXXXXX" + buf[8:])
    with pytest.raises(TruncatedFileError):
        model_from_bytes(buf[:-8])


def test_flat_roundtrip():
    model = small_model()
    flat = model.get_flat()
    other = small_model(seed=99)
    other.set_flat(flat)
    assert other.get_flat().tobytes() == flat.tobytes()
    with pytest.raises(DimensionError):
        other.set_flat(flat[:-1])
