import numpy as np
import pytest

from epikappa.losses import (
    ObservationSpec,
    ObserverSpec,
    ShootingConfig,
    TrainableLayout,
    TrainingProblem,
    anchor_nodes,
    loss_gradient,
    loss_ms,
    loss_ms_pem,
    loss_parts,
    loss_pem,
    loss_ude,
    reconstruct_z,
    reconstruct_z_vjp,
    variance_weights,
    window_starts,
)
from tests.helpers import make_problem, true_phi


# ----------------------------------------------------------------------
# node parameterization


def test_reconstruct_z_uniform_point():
    z = reconstruct_z(np.zeros(6), 0.0, 600.0)
    assert z[6] == pytest.approx(300.0)
    assert np.allclose(z[:6], 50.0)


def test_reconstruct_z_shift_invariance():
    rng = np.random.default_rng(1)
    w = rng.normal(size=6)
    a = reconstruct_z(w, 0.3, 1e5)
    b = reconstruct_z(w + 17.5, 0.3, 1e5)
    assert np.max(np.abs(a - b)) <= 1e-9


def test_reconstruct_z_no_deaths_limit():
    z = reconstruct_z(np.zeros(6), -200.0, 1e5)
    assert z[6] == pytest.approx(0.0, abs=1e-12)
    assert z[:6].sum() == pytest.approx(1e5)


def test_reconstruct_z_always_feasible():
    rng = np.random.default_rng(2)
    N = 1e5
    for _ in range(10_000):
        z = reconstruct_z(rng.normal(scale=5, size=6), rng.normal(scale=5), N)
        assert abs(z.sum() - N) <= 1e-12 * N
        assert z.min() >= 0.0


def test_reconstruct_z_vjp_matches_finite_differences():
    rng = np.random.default_rng(3)
    N = 1e5
    w = rng.normal(size=6)
    delta = 0.4
    z_bar = rng.normal(size=7)
    w_bar, d_bar = reconstruct_z_vjp(w, delta, N, z_bar)
    eps = 1e-6
    for i in range(6):
        dw = np.zeros(6)
        dw[i] = eps
        fd = (reconstruct_z(w + dw, delta, N) - reconstruct_z(w - dw, delta, N)) @ z_bar
        assert w_bar[i] == pytest.approx(fd / (2 * eps), rel=1e-5, abs=1e-6)
    fd = (reconstruct_z(w, delta + eps, N) - reconstruct_z(w, delta - eps, N)) @ z_bar
    assert d_bar == pytest.approx(fd / (2 * eps), rel=1e-5)


# ----------------------------------------------------------------------
# window partition


def test_window_starts_default_horizon():
    starts = window_starts(90, 11)
    assert starts == [0, 11, 22, 33, 44, 55, 66, 77]  # last window holds 13 points


def test_window_starts_single_window():
    assert window_starts(90, 90) == [0]
    assert window_starts(90, 200) == [0]


def test_window_starts_short_tail_absorbed():
    # a tail shorter than 3 observations folds into the previous window
    assert window_starts(90, 89) == [0]
    assert window_starts(4, 2) == [0]
    assert window_starts(92, 11) == [0, 11, 22, 33, 44, 55, 66, 77, 88]


def test_variance_weights_inverse_std():
    y = np.zeros((50, 2))
    y[:, 0] = np.linspace(0, 10, 50)
    y[:, 1] = np.linspace(0, 100, 50)
    w = variance_weights(y)
    assert w[0] / w[1] == pytest.approx(10.0)


# ----------------------------------------------------------------------
# reductions (exact, shared engine)


def test_pem_with_observer_off_equals_ude():
    problem = make_problem(n_days=20, seed=5, group_size=7, lambda_gain=0.0)
    phi = TrainableLayout("ude", problem).init(np.random.default_rng(7))
    vec_pem = np.concatenate([phi, np.zeros(7)])
    assert loss_pem(vec_pem, problem) == loss_ude(phi, problem)


def test_ms_single_window_equals_ude():
    problem = make_problem(n_days=20, seed=5, group_size=50)
    phi = TrainableLayout("ude", problem).init(np.random.default_rng(7))
    assert loss_ms(phi, problem) == loss_ude(phi, problem)


def test_ms_pem_with_observer_off_equals_ms():
    problem = make_problem(n_days=20, seed=5, group_size=7, lambda_gain=0.0)
    vec_ms = TrainableLayout("ms", problem).init(np.random.default_rng(9))
    vec_mspem = np.concatenate([vec_ms, np.zeros(7)])
    assert loss_ms_pem(vec_mspem, problem) == loss_ms(vec_ms, problem)


def test_double_reduction_single_window_observer_off():
    problem = make_problem(n_days=20, seed=5, group_size=50, lambda_gain=0.0)
    phi = TrainableLayout("ude", problem).init(np.random.default_rng(11))
    vec = np.concatenate([phi, np.zeros(7)])
    assert loss_ms_pem(vec, problem) == loss_ude(phi, problem)


# ----------------------------------------------------------------------
# loss values


def test_zero_residual_zero_data_term_and_gradient():
    problem = make_problem(n_days=15, seed=13)
    phi = true_phi(13)
    parts = loss_parts("ude", phi, problem)
    assert parts.data == 0.0
    assert parts.total == 0.0
    _, grad = loss_gradient("ude", phi, problem)
    assert np.max(np.abs(grad)) == 0.0


def test_loss_nonnegative_and_breakdown_adds_up():
    problem = make_problem(n_days=20, seed=21, noise=1e-3)
    rng = np.random.default_rng(3)
    lay = TrainableLayout("mspem", problem)
    vec = lay.init(rng)
    vec[lay.gains_sl] = rng.uniform(-0.05, 0.05, size=7)
    parts = loss_parts("mspem", vec, problem)
    assert parts.data >= 0 and parts.continuity >= 0 and parts.gain > 0
    assert parts.total == pytest.approx(parts.data + parts.continuity + parts.gain)


def test_doubling_weights_quadruples_data_term():
    base = make_problem(n_days=15, seed=17, noise=1e-3, weights=np.ones(7))
    heavy = make_problem(n_days=15, seed=17, noise=1e-3, weights=2.0 * np.ones(7))
    phi = TrainableLayout("ude", base).init(np.random.default_rng(0))
    assert loss_ude(phi, heavy) == pytest.approx(4.0 * loss_ude(phi, base), rel=1e-12)


def test_normalized_flag_rescales_data_term():
    counts = make_problem(n_days=15, seed=19, noise=1e-3, normalized=False, weights=np.ones(7))
    normed = make_problem(n_days=15, seed=19, noise=1e-3, normalized=True, weights=np.ones(7))
    phi = TrainableLayout("ude", counts).init(np.random.default_rng(0))
    assert loss_ude(phi, normed) == pytest.approx(
        loss_ude(phi, counts) / counts.n0**2, rel=1e-12
    )


def test_gain_regularizer_arithmetic():
    # lambda_gain = 0.1 and ||K||_F = 2 contribute exactly 0.4
    problem = make_problem(n_days=10, seed=23, lambda_gain=0.1)
    lay = TrainableLayout("pem", problem)
    vec = np.zeros(lay.size)
    vec[lay.phi_sl] = true_phi(23)
    base = loss_parts("pem", vec, problem)
    assert base.data == 0.0 and base.gain == 0.0
    vec[lay.gains_sl][0] = 2.0
    assert loss_parts("pem", vec, problem).gain == pytest.approx(0.4, rel=1e-12)


def test_constant_residual_mean_value():
    # single observed series, unit weight, constant residual 2 -> loss 4
    problem = make_problem(n_days=10, seed=29)
    H = np.zeros((1, 7))
    H[0, 5] = 1.0  # observe R only
    shifted = TrainingProblem(
        params=problem.params,
        t=problem.t,
        y=problem.y @ H.T + 2.0,
        u0=problem.u0,
        obs=ObservationSpec(H=H),
        shooting=problem.shooting,
        observer=problem.observer,
    )
    assert loss_ude(true_phi(29), shifted) == pytest.approx(4.0, rel=1e-9)


def test_continuity_term_vanishes_at_consistent_nodes():
    problem = make_problem(n_days=20, seed=31, group_size=7)
    lay = TrainableLayout("ms", problem)
    vec = np.zeros(lay.size)
    vec[lay.phi_sl] = true_phi(31)
    vec[lay.nodes_sl] = anchor_nodes(problem, lay.starts)
    parts = loss_parts("ms", vec, problem)
    # anchored nodes reproduce the noiseless model data, so both the
    # per-window residuals and the boundary gaps stay at rounding level
    assert parts.continuity <= 1e-10
    assert parts.data <= 1e-10


def test_strategy_vector_sizes():
    problem = make_problem(n_days=20, group_size=7)
    assert TrainableLayout("ude", problem).size == 301
    assert TrainableLayout("pem", problem).size == 308
    assert TrainableLayout("ms", problem).size == 301 + 14
    assert TrainableLayout("mspem", problem).size == 301 + 14 + 7
    with pytest.raises(ValueError):
        TrainableLayout("sgd", problem)


def test_observation_spec_validation():
    with pytest.raises(ValueError, match="weights"):
        ObservationSpec(weights=np.zeros(7))
    with pytest.raises(ValueError, match="nonneg"):
        ObservationSpec(H=-np.eye(7))
    with pytest.raises(ValueError, match="group_size"):
        ShootingConfig(group_size=0)
    with pytest.raises(ValueError, match="lambda_ms"):
        ShootingConfig(lambda_ms=0.0)
    with pytest.raises(ValueError, match=">= 0"):
        ObserverSpec(lambda_gain=-1.0)


def test_problem_validation():
    problem = make_problem(n_days=10)
    with pytest.raises(ValueError, match="uniform"):
        TrainingProblem(
            params=problem.params,
            t=np.array([0.0, 1.0, 3.0]),
            y=problem.y[:3],
            u0=problem.u0,
        )
    with pytest.raises(ValueError, match="untrainable"):
        TrainingProblem(
            params=problem.params,
            t=problem.t,
            y=problem.y,
            u0=problem.u0,
            theta_names=("N",),
        )
