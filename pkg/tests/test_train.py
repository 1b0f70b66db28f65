import numpy as np
import pytest

from specden.covariance import BrownianSheet, Far1Config, simulate_far1
from specden.errors import ConfigError, DivergenceError
from specden.grid import Grid
from specden.nn.loss import loss
from specden.nn.mlp import Architecture
from specden.nn.model import SpectralNNModel
from specden.nn.train import Hyper, TrainConfig, train

HYPER = Hyper(2, 1, Architecture("deep-shared", 2, 4))


@pytest.fixture(scope="module")
def data():
    return simulate_far1(Far1Config(BrownianSheet(), 0.5, 15, Grid(1, 12), seed=3, burn_in=20))


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(q=0)
    with pytest.raises(ConfigError):
        TrainConfig(freq_points=1)
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)


def test_train_deterministic(data):
    cfg = TrainConfig(q=3, epochs=5, freq_points=8, seed=4)
    a = train(data, HYPER, cfg)
    b = train(data, HYPER, cfg)
    assert a.model.get_flat().tobytes() == b.model.get_flat().tobytes()
    assert [h[1] for h in a.history] == [h[1] for h in b.history]


def test_train_history_and_best_state(data):
    cfg = TrainConfig(q=3, epochs=30, freq_points=8, lr=1e-2)
    res = train(data, HYPER, cfg)
    assert len(res.history) == 30
    assert res.best_loss <= res.initial_loss
    assert loss(res.model, data, cfg) == pytest.approx(res.best_loss, rel=1e-12)
    assert res.best_loss <= min(h[1] for h in res.history)


def test_train_initial_state_follows_seed(data):
    cfg = TrainConfig(q=3, epochs=1, freq_points=8, seed=9)
    res = train(data, HYPER, cfg)
    init = SpectralNNModel.initialize(data.grid, data.n, 2, 1, HYPER.arch, seed=9)
    assert res.initial_loss == pytest.approx(loss(init, data, cfg), rel=1e-14)
    assert np.abs(init.xi).max() < 1.0


def test_divergence_reports_epoch(data):
    cfg = TrainConfig(q=3, epochs=3, freq_points=8, lr=1e300)
    with pytest.raises(DivergenceError) as exc:
        train(data, HYPER, cfg)
    assert exc.value.epoch == 2
