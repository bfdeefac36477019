import numpy as np
import pytest

from epikappa.contact import StepContact
from epikappa.errors import DivergenceError
from epikappa.params import EpiParams
from epikappa.solvers import SolveConfig, rk4_span, solve

PARAMS = EpiParams()
SCENARIO = StepContact(0.8, 0.3, 49.0)
FLAT = StepContact(0.6, 0.6, 49.0)


def outbreak_state(N, e0=500.0):
    u0 = np.zeros(7)
    u0[0] = N - e0
    u0[1] = e0
    return u0


def test_all_recovered_state_is_stationary():
    u0 = np.zeros(7)
    u0[5] = PARAMS.N
    traj = solve(u0, (0.0, 30.0), PARAMS, SCENARIO)
    assert np.array_equal(traj.states, np.tile(u0, (31, 1)))


def test_mass_and_positivity_without_projection():
    u0 = outbreak_state(PARAMS.N)
    cfg = SolveConfig(projection="off")
    traj = solve(u0, (0.0, 89.0), PARAMS, SCENARIO, cfg)
    assert traj.states.shape == (90, 7)
    mass_err = np.abs(traj.states.sum(axis=1) - PARAMS.N)
    assert mass_err.max() <= 1e-8 * PARAMS.N
    assert traj.states.min() >= -1e-10 * PARAMS.N


def test_step_refinement_agreement():
    u0 = outbreak_state(PARAMS.N)
    coarse = solve(u0, (0.0, 89.0), PARAMS, SCENARIO, SolveConfig(h=0.25))
    fine = solve(u0, (0.0, 89.0), PARAMS, SCENARIO, SolveConfig(h=0.025))
    assert np.max(np.abs(coarse.states - fine.states)) <= 1e-6 * PARAMS.N


def test_fourth_order_convergence():
    u0 = outbreak_state(PARAMS.N)
    saveat = np.array([0.0, 30.0])
    ref = solve(
        u0, (0.0, 30.0), PARAMS, FLAT,
        SolveConfig(method="dp54", rtol=1e-12, atol=1e-12, projection="off"),
        saveat=saveat,
    ).states[-1]
    errs = []
    for h in (1.0, 0.5):
        got = solve(u0, (0.0, 30.0), PARAMS, FLAT,
                    SolveConfig(h=h, projection="off"), saveat=saveat).states[-1]
        errs.append(np.max(np.abs(got - ref)))
    ratio = errs[0] / errs[1]
    assert 12.0 <= ratio <= 22.0


def test_adaptive_matches_fixed_step_daily():
    u0 = outbreak_state(PARAMS.N)
    rk4 = solve(u0, (0.0, 89.0), PARAMS, SCENARIO, SolveConfig(h=0.25))
    dp = solve(u0, (0.0, 89.0), PARAMS, SCENARIO,
               SolveConfig(method="dp54", rtol=1e-10, atol=1e-8))
    assert np.max(np.abs(rk4.states - dp.states)) <= 1e-5 * PARAMS.N


def test_hard_step_split_matches_manual_two_stage():
    u0 = outbreak_state(PARAMS.N)
    whole = solve(u0, (0.0, 90.0), PARAMS, SCENARIO)
    pre = solve(u0, (0.0, 49.0), PARAMS, StepContact(0.8, 0.8, 999.0))
    post = solve(pre.states[-1], (49.0, 90.0), PARAMS, StepContact(0.3, 0.3, 999.0),
                 saveat=np.arange(49.0, 90.5, 1.0))
    manual = np.vstack([pre.states, post.states[1:]])
    assert np.max(np.abs(whole.states - manual)) <= 1e-9 * PARAMS.N


def test_deterministic_repeat():
    u0 = outbreak_state(PARAMS.N)
    a = solve(u0, (0.0, 89.0), PARAMS, SCENARIO)
    b = solve(u0, (0.0, 89.0), PARAMS, SCENARIO)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.t, b.t)


def test_save_projection_keeps_states_feasible():
    u0 = outbreak_state(PARAMS.N)
    traj = solve(u0, (0.0, 89.0), PARAMS, SCENARIO, SolveConfig(projection="save"))
    assert np.abs(traj.states.sum(axis=1) - PARAMS.N).max() <= 1e-9 * PARAMS.N
    assert traj.states.min() >= 0.0


def test_step_projection_is_identity_on_feasible_path():
    u0 = outbreak_state(PARAMS.N)
    off = solve(u0, (0.0, 60.0), PARAMS, SCENARIO, SolveConfig(projection="off"))
    stepped = solve(u0, (0.0, 60.0), PARAMS, SCENARIO, SolveConfig(projection="step"))
    assert np.array_equal(off.states, stepped.states)


def test_correction_term_is_integrated():
    # zero mechanistic flow (absorbing state) + constant feasible swap R -> S
    u0 = np.zeros(7)
    u0[5] = PARAMS.N
    w = np.zeros(7)
    w[0], w[5] = 10.0, -10.0
    traj = solve(u0, (0.0, 1.0), PARAMS, SCENARIO, correction=lambda U, t: w[None, :])
    assert traj.states[-1, 0] == pytest.approx(10.0, rel=1e-12)
    assert traj.states[-1, 5] == pytest.approx(PARAMS.N - 10.0, rel=1e-12)


def test_saveat_validation():
    u0 = outbreak_state(PARAMS.N)
    with pytest.raises(ValueError, match="start at t0"):
        solve(u0, (0.0, 10.0), PARAMS, SCENARIO, saveat=np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="strictly increasing"):
        solve(u0, (0.0, 10.0), PARAMS, SCENARIO, saveat=np.array([0.0, 2.0, 2.0]))
    with pytest.raises(ValueError, match="degenerate"):
        solve(u0, (5.0, 5.0), PARAMS, SCENARIO)


def test_nan_correction_raises_divergence():
    u0 = outbreak_state(PARAMS.N)
    bad = lambda U, t: np.full_like(U, np.nan)
    with pytest.raises(DivergenceError) as exc:
        solve(u0, (0.0, 10.0), PARAMS, SCENARIO, correction=bad)
    assert exc.value.last_valid_time is not None


def test_rk4_span_hits_endpoint_with_rounded_substeps():
    calls = []

    def f(U, t):
        calls.append(t)
        return np.zeros_like(U)

    rk4_span(np.zeros((1, 7)), 0.0, 1.0, 0.3, f)
    # 3 substeps of 1/3 each; final stage evaluated exactly at t=1
    assert len(calls) == 12
    assert calls[-1] == pytest.approx(1.0, abs=1e-15)


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(method="euler")
    with pytest.raises(ValueError):
        SolveConfig(projection="sometimes")
    with pytest.raises(ValueError):
        SolveConfig(h=0.0)
