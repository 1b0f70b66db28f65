import math

import numpy as np
import pytest

from specden.errors import ConfigError
from specden.nn.mlp import Architecture, NetworkBank, mlp_eval, sigmoid

ARCHES = [
    Architecture("shallow", 1, 6),
    Architecture("deep-shared", 3, 5, heads=4),
    Architecture("deep", 3, 4, heads=3),
    Architecture("deep", 1, 4, heads=2),
]


def _sig(t):
    return 1.0 / (1.0 + math.exp(-t))


def _forward_one(arch, p, u):
    """Straight-line forward pass of one network; ``p`` holds per-network arrays."""
    if arch.kind == "deep":
        total = 0.0
        for r in range(arch.n_heads):
            a = list(u)
            for j in range(1, arch.n_hidden + 1):
                w, b = p[f"W{j}"][r], p[f"B{j}"][r]
                a = [_sig(sum(w[i][k] * a[k] for k in range(len(a))) + b[i]) for i in range(len(b))]
            z = sum(p["w"][r][k] * a[k] for k in range(len(a))) + p["b"][r]
            total += p["c"][r] * _sig(z)
        return total
    a = list(u)
    for j in range(1, arch.n_hidden + 1):
        w, b = p[f"W{j}"], p[f"B{j}"]
        a = [_sig(sum(w[i][k] * a[k] for k in range(len(a))) + b[i]) for i in range(len(b))]
    total = 0.0
    for r in range(arch.n_heads):
        z = sum(p["w"][r][k] * a[k] for k in range(len(a))) + p["b"][r]
        total += p["c"][r] * _sig(z)
    return total


def test_sigmoid_values():
    assert sigmoid(np.array(0.0)) == 0.5
    x = np.linspace(-30, 30, 101)
    np.testing.assert_allclose(sigmoid(x.copy()), 1 / (1 + np.exp(-x)), rtol=1e-15, atol=1e-16)


@pytest.mark.parametrize("arch", ARCHES, ids=lambda a: f"{a.kind}-{a.depth}")
def test_all_zero_is_zero(arch):
    bank = NetworkBank.initialize(arch, 2, (2,), np.random.default_rng(0))
    for k in bank.params:
        bank.params[k][:] = 0.0
    assert mlp_eval(bank, (1,), [0.3, 0.4]) == 0.0


def test_single_unit_two_sigma_zero():
    arch = Architecture("deep-shared", 1, 1, heads=1)
    bank = NetworkBank(arch, 1, (1,), {"w": np.zeros((1, 1, 1)), "b": np.zeros((1, 1)), "c": np.full((1, 1), 2.0)})
    assert mlp_eval(bank, (0,), [0.7]) == 1.0


@pytest.mark.parametrize("arch", ARCHES, ids=lambda a: f"{a.kind}-{a.depth}")
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_forward_matches_straight_line(arch, dim, rng):
    lead = (2, 3)
    bank = NetworkBank.initialize(arch, dim, lead, rng, scale=2.0)
    pts = rng.uniform(0, 1, (10, dim))
    out = bank.evaluate(pts)
    assert out.shape == lead + (10,)
    for i in range(2):
        for j in range(3):
            p = {k: v[i, j] for k, v in bank.params.items()}
            for n in range(10):
                assert abs(out[i, j, n] - _forward_one(arch, p, pts[n])) < 1e-14


@pytest.mark.parametrize("arch", ARCHES, ids=lambda a: f"{a.kind}-{a.depth}")
def test_backward_matches_finite_differences(arch, rng):
    bank = NetworkBank.initialize(arch, 2, (3,), rng)
    pts = rng.uniform(0, 1, (7, 2))
    dout = rng.standard_normal((3, 7))
    _, cache = bank.forward(pts, keep=True)
    grads = bank.backward(dout, cache)
    eps = 1e-6
    for name, arr in bank.params.items():
        flat = arr.reshape(-1)
        for idx in range(0, flat.size, max(1, flat.size // 15)):
            old = flat[idx]
            flat[idx] = old + eps
            up = np.sum(dout * bank.forward(pts))
            flat[idx] = old - eps
            dn = np.sum(dout * bank.forward(pts))
            flat[idx] = old
            fd = (up - dn) / (2 * eps)
            assert grads[name].reshape(-1)[idx] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_architecture_validation():
    with pytest.raises(ConfigError):
        Architecture("wide")
    with pytest.raises(ConfigError):
        Architecture(depth=0)


def test_param_shapes_deep_shared_default():
    shapes = dict(Architecture().param_shapes(1))
    assert shapes["W1"] == (20, 1)
    assert shapes["W3"] == (20, 20)
    assert "W4" not in shapes
    assert shapes["w"] == (20, 20) and shapes["c"] == (20,)


def test_initialize_bounds(rng):
    arch = Architecture("deep-shared", 2, 8)
    bank = NetworkBank.initialize(arch, 3, (4,), rng, scale=1.0)
    assert np.abs(bank.params["W1"]).max() <= 1 / math.sqrt(3)
    assert np.abs(bank.params["B1"]).max() <= 1 / math.sqrt(3)
    assert np.abs(bank.params["w"]).max() <= 1 / math.sqrt(8)
