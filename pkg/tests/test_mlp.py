import numpy as np
import pytest

from epikappa import mlp
from tests.oracles import central_difference


def test_parameter_count():
    # 6*10+10 + 2*(10*10+10) + 10*1+1 = 301
    assert mlp.N_PARAMS == 301
    rng = np.random.default_rng(0)
    assert mlp.init_params(rng).shape == (301,)


def test_unflatten_views_share_memory():
    phi = np.zeros(mlp.N_PARAMS)
    weights = mlp.unflatten(phi)
    weights[0][0][0, 0] = 5.0
    assert phi[0] == 5.0


def test_forward_zero_weights():
    phi = np.zeros(mlp.N_PARAMS)
    x = np.random.default_rng(1).normal(size=(4, 6))
    z, _ = mlp.forward_cached(mlp.unflatten(phi), x)
    assert np.array_equal(z, np.zeros(4))
    assert np.all(mlp.contact_value(phi, x, 0.9) == 0.45)


def test_sigmoid_saturates_without_overflow():
    assert mlp.sigmoid(1000.0) == pytest.approx(1.0)
    assert mlp.sigmoid(-1000.0) == pytest.approx(0.0, abs=1e-20)


def test_vjp_parameter_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    phi = mlp.init_params(rng, scale=0.4)
    x = rng.normal(size=(3, 6))
    zbar = rng.normal(size=3)

    def scalar(p):
        z, _ = mlp.forward_cached(mlp.unflatten(p.copy()), x)
        return float(z @ zbar)

    weights = mlp.unflatten(phi)
    z, cache = mlp.forward_cached(weights, x)
    grad = np.zeros(mlp.N_PARAMS)
    mlp.vjp(weights, cache, zbar, grad)
    for idx in rng.choice(mlp.N_PARAMS, size=25, replace=False):
        fd = central_difference(scalar, phi, int(idx), eps=1e-6)
        assert grad[idx] == pytest.approx(fd, rel=2e-5, abs=1e-9)


def test_vjp_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    phi = mlp.init_params(rng, scale=0.4)
    x = rng.normal(size=(2, 6))
    zbar = rng.normal(size=2)
    weights = mlp.unflatten(phi)
    z, cache = mlp.forward_cached(weights, x)
    xbar = mlp.vjp(weights, cache, zbar, np.zeros(mlp.N_PARAMS))
    eps = 1e-6
    for b in range(2):
        for j in range(6):
            xp, xm = x.copy(), x.copy()
            xp[b, j] += eps
            xm[b, j] -= eps
            zp, _ = mlp.forward_cached(weights, xp)
            zm, _ = mlp.forward_cached(weights, xm)
            fd = float((zp @ zbar - zm @ zbar) / (2 * eps))
            assert xbar[b, j] == pytest.approx(fd, rel=2e-5, abs=1e-9)
