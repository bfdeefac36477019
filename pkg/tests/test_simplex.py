import numpy as np
import pytest

from epikappa.simplex import (
    is_feasible,
    project_feasible,
    project_feasible_batch,
    projection_vjp,
)
from tests.oracles import project_simplex_bruteforce


def test_matches_bruteforce_oracle_random():
    rng = np.random.default_rng(42)
    V = rng.normal(scale=3.0, size=(500, 7))
    N = 2.0
    got = project_feasible_batch(V, N)
    for v, g in zip(V, got):
        expect = project_simplex_bruteforce(v, N)
        assert np.max(np.abs(g - expect)) <= 1e-10


def test_matches_bruteforce_oracle_negative_entry():
    v = np.array([-1.0, 3.0, 0, 0, 0, 0, 0])
    got = project_feasible(v, 2.0)
    expect = project_simplex_bruteforce(v, 2.0)
    assert np.max(np.abs(got - expect)) <= 1e-12
    assert got.sum() == pytest.approx(2.0)
    assert np.all(got >= 0)


def test_identity_on_feasible_points():
    rng = np.random.default_rng(0)
    N = 1e5
    V = rng.dirichlet(np.ones(7), size=100) * N
    got = project_feasible_batch(V, N)
    assert np.max(np.abs(got - V)) <= 1e-9 * N


def test_variational_inequality():
    # <v - proj(v), w - proj(v)> <= 0 for every feasible w
    rng = np.random.default_rng(9)
    N = 3.0
    for _ in range(50):
        v = rng.normal(scale=2.0, size=7)
        p = project_feasible(v, N)
        W = rng.dirichlet(np.ones(7), size=200) * N
        inner = (W - p) @ (v - p)
        assert np.max(inner) <= 1e-9


def test_idempotent():
    rng = np.random.default_rng(17)
    V = rng.normal(scale=5.0, size=(100, 7))
    once = project_feasible_batch(V, 1.0)
    twice = project_feasible_batch(once, 1.0)
    assert np.max(np.abs(twice - once)) <= 1e-12


def test_is_feasible_tolerances():
    N = 100.0
    u = np.array([50.0, 10, 10, 10, 10, 10, 0])
    assert is_feasible(u[None, :], N)
    assert not is_feasible((u + 1.0)[None, :], N)  # mass off by 7
    v = u.copy()
    v[6] = -1e-3
    v[0] += 1e-3
    assert not is_feasible(v[None, :], N)


def test_projection_vjp_matches_finite_differences():
    rng = np.random.default_rng(23)
    N = 2.0
    eps = 1e-6
    checked = 0
    for _ in range(40):
        v = rng.normal(scale=1.5, size=7)
        p = project_feasible(v, N)
        active = p > 0
        # skip points too close to an active-set change
        if np.any((p > 0) & (p < 10 * eps)):
            continue
        gbar = rng.normal(size=7)
        got = projection_vjp(gbar[None, :], active[None, :])[0]
        jac = np.empty((7, 7))
        for i in range(7):
            d = np.zeros(7)
            d[i] = eps
            jac[:, i] = (project_feasible(v + d, N) - project_feasible(v - d, N)) / (2 * eps)
        expect = jac.T @ gbar
        assert np.max(np.abs(got - expect)) <= 1e-6
        checked += 1
    assert checked >= 20
