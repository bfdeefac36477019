import numpy as np
import pytest

from epikappa.errors import DivergenceError
from epikappa.losses import TrainableLayout, loss_gradient, loss_parts
from epikappa.tape import THETA_NAMES, GradTape
from tests.helpers import make_problem, outbreak_u0, start_vector


def check_coords(strategy, problem, vec, coords, rel_tol=1e-4):
    _, grad = loss_gradient(strategy, vec, problem)
    # central differences carry ~eps_mach*loss/eps of absolute noise, so
    # coordinates far below the gradient's own scale need an absolute floor
    atol = 1e-6 * max(1.0, float(np.abs(grad).max()))
    for idx in coords:
        eps = 1e-5 * max(1.0, abs(vec[idx]))
        vp, vm = vec.copy(), vec.copy()
        vp[idx] += eps
        vm[idx] -= eps
        fd = (loss_parts(strategy, vp, problem).total
              - loss_parts(strategy, vm, problem).total) / (2 * eps)
        err = abs(grad[idx] - fd)
        bound = rel_tol * max(abs(fd), abs(grad[idx])) + atol
        assert err <= bound, f"{strategy} coord {idx}: ad={grad[idx]} fd={fd}"


@pytest.mark.parametrize("strategy", ["ude", "ms", "pem", "mspem"])
def test_gradient_matches_central_differences(strategy):
    problem = make_problem(n_days=18, seed=41, group_size=7, noise=2e-3)
    vec = start_vector(strategy, problem, seed=43)
    rng = np.random.default_rng(47)
    coords = rng.choice(vec.size, size=8, replace=False)
    # always include a coordinate from each trailing block
    lay = TrainableLayout(strategy, problem)
    extras = [lay.size - 1, lay.phi_sl.stop - 1]
    if lay.nodes_sl.stop > lay.nodes_sl.start:
        extras.append(lay.nodes_sl.start + 3)
    coords = np.unique(np.concatenate([coords, extras]))
    check_coords(strategy, problem, vec, coords)


def test_gradient_matches_along_random_directions():
    problem = make_problem(n_days=15, seed=53, group_size=6, noise=1e-3)
    vec = start_vector("mspem", problem, seed=59)
    _, grad = loss_gradient("mspem", vec, problem)
    rng = np.random.default_rng(61)
    for _ in range(4):
        d = rng.normal(size=vec.size)
        d /= np.linalg.norm(d)
        eps = 1e-5
        fd = (loss_parts("mspem", vec + eps * d, problem).total
              - loss_parts("mspem", vec - eps * d, problem).total) / (2 * eps)
        assert abs(grad @ d - fd) / max(abs(fd), 1e-10) <= 1e-4


def test_mechanistic_parameter_gradients():
    problem = make_problem(n_days=15, seed=67, noise=1e-3, theta_names=THETA_NAMES)
    lay = TrainableLayout("ude", problem)
    vec = start_vector("ude", problem, seed=71)
    check_coords("ude", problem, vec, range(lay.theta_sl.start, lay.theta_sl.stop))


def test_gradient_evaluations_bit_identical():
    problem = make_problem(n_days=15, seed=73, noise=1e-3)
    vec = start_vector("pem", problem, seed=79)
    p1, g1 = loss_gradient("pem", vec, problem)
    p2, g2 = loss_gradient("pem", vec, problem)
    assert p1.total == p2.total
    assert np.array_equal(g1, g2)


def test_divergent_window_reported():
    problem = make_problem(n_days=15, seed=83, theta_names=("T_E",))
    lay = TrainableLayout("ude", problem)
    vec = start_vector("ude", problem, seed=89)
    vec[lay.theta_sl] = 1e-300  # latent stage empties at an astronomic rate
    with pytest.raises(DivergenceError) as exc:
        loss_parts("ude", vec, problem)
    assert exc.value.window == 0


def test_tape_forward_matches_plain_solver_daily_states():
    from epikappa.contact import NeuralContact
    from epikappa.params import EpiParams
    from epikappa.solvers import SolveConfig, solve
    from epikappa import mlp

    params = EpiParams()
    phi = mlp.init_params(np.random.default_rng(97), scale=0.3)
    u0 = outbreak_u0(params)
    tape = GradTape(params, phi, params.N)
    saved = tape.forward(u0[None, :], np.zeros(1), 1.0, 30)
    traj = solve(
        u0, (0.0, 30.0), params, NeuralContact(phi, n0=params.N),
        SolveConfig(projection="off"),
    )
    assert np.max(np.abs(saved[:, 0, :] - traj.states)) <= 1e-8 * params.N
