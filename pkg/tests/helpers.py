"""Shared builders for loss and training tests."""

import numpy as np

from epikappa import mlp
from epikappa.losses import (
    ObservationSpec,
    ObserverSpec,
    ShootingConfig,
    TrainableLayout,
    TrainingProblem,
)
from epikappa.params import EpiParams
from epikappa.tape import GradTape


def outbreak_u0(params: EpiParams, e0: float = 500.0) -> np.ndarray:
    u0 = np.zeros(7)
    u0[0] = params.N - e0
    u0[1] = e0
    return u0


def model_targets(params, phi, u0, n_days, kappa_max=1.0, h=0.25):
    """Daily states generated by the taped integrator itself."""
    tape = GradTape(params, phi, float(params.N - u0[6]), kappa_max=kappa_max, h=h)
    saved = tape.forward(u0[None, :], np.zeros(1), 1.0, n_days)
    return saved[:, 0, :]


def true_phi(seed: int) -> np.ndarray:
    """The weights used to generate a problem's targets for that seed."""
    return mlp.init_params(np.random.default_rng(seed), scale=0.3)


def make_problem(
    n_days: int = 20,
    seed: int = 0,
    group_size: int = 7,
    lambda_gain: float = 1e-3,
    lambda_sparse: float = 0.0,
    theta_names: tuple = (),
    normalized: bool = True,
    weights="var",
    noise: float = 0.0,
) -> TrainingProblem:
    """Small synthetic problem with identity observations.

    ``weights="var"`` applies per-series inverse-std weighting in whatever
    units the loss runs in; pass an array or None (unit weights) to override.
    """
    from epikappa.losses import variance_weights

    params = EpiParams()
    rng = np.random.default_rng(seed)
    phi_true = mlp.init_params(rng, scale=0.3)
    u0 = outbreak_u0(params)
    y = model_targets(params, phi_true, u0, n_days)
    if noise:
        y = y + rng.normal(scale=noise * params.N, size=y.shape)
    if isinstance(weights, str) and weights == "var":
        n0 = params.N - u0[6]
        weights = variance_weights(y / n0 if normalized else y)
    return TrainingProblem(
        params=params,
        t=np.arange(n_days + 1.0),
        y=y,
        u0=u0,
        obs=ObservationSpec(weights=weights, normalized=normalized),
        shooting=ShootingConfig(group_size=group_size),
        observer=ObserverSpec(lambda_gain=lambda_gain, lambda_sparse=lambda_sparse),
        theta_names=theta_names,
    )


def start_vector(strategy, problem, seed, gain_scale=0.05):
    """Layout init plus small perturbations so no block sits at a stationary point."""
    rng = np.random.default_rng(seed)
    lay = TrainableLayout(strategy, problem)
    vec = lay.init(rng)
    if lay.gains_sl.stop > lay.gains_sl.start:
        vec[lay.gains_sl] = rng.uniform(-gain_scale, gain_scale, size=7)
    if lay.nodes_sl.stop > lay.nodes_sl.start:
        vec[lay.nodes_sl] += rng.normal(scale=0.01, size=lay.nodes_sl.stop - lay.nodes_sl.start)
    if problem.theta_names:
        vec[lay.theta_sl] *= 1.0 + rng.uniform(-0.02, 0.02, size=len(problem.theta_names))
    return vec
