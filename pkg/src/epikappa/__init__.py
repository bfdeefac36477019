"""Neural-augmented compartment models trained on stochastic ensembles.

The package ties four pieces together: a seven-compartment mechanistic
core with a state-dependent neural contact rate, stochastic tau-leaping
ensembles that stand in for agent-model output, four stabilized training
strategies (plain shooting, multiple shooting, observer-based, and their
combination) over a shared loss engine, and serving plumbing (CLI + HTTP)
for what-if exploration of trained surrogates.
"""

from .abm import TrajectoryEnsemble, build_ensemble, simulate_ensemble, simulate_realization
from .contact import NeuralContact, SmoothStepContact, StepContact
from .dataio import read_dataset, read_trajectory, write_dataset, write_trajectory
from .errors import (
    DegeneratePopulationError,
    DivergenceError,
    EpikappaError,
    GridMismatchError,
    IngestionError,
    ParameterValidationError,
)
from .fitting import (
    EnsembleSummary,
    TrainedModel,
    evaluation_trajectory,
    fit,
    fit_ensemble,
    spawn_seeds,
    write_training_log,
)
from .losses import (
    LossParts,
    ObservationSpec,
    ObserverSpec,
    ShootingConfig,
    TrainingProblem,
    loss_gradient,
    loss_ms,
    loss_ms_pem,
    loss_parts,
    loss_pem,
    loss_ude,
    predicted_states,
    variance_weights,
)
from .metrics import (
    MetricsReport,
    compare_methods,
    coverage,
    latency_profile,
    mse,
    normalized_mse,
)
from .optim import OptimBudget, OptimResult, adam, lbfgs, minimize
from .params import N_STATES, STATE_NAMES, EpiParams
from .scenario import (
    ScenarioConfig,
    breach_day,
    default_scenario,
    ensemble_data,
    icu_series,
    mean_field,
)
from .simplex import project_feasible, project_feasible_batch
from .solvers import SolveConfig, Trajectory, solve

__version__ = "0.1.0"

__all__ = [
    "DegeneratePopulationError",
    "DivergenceError",
    "EnsembleSummary",
    "EpiParams",
    "EpikappaError",
    "GridMismatchError",
    "IngestionError",
    "LossParts",
    "MetricsReport",
    "N_STATES",
    "NeuralContact",
    "ObservationSpec",
    "ObserverSpec",
    "OptimBudget",
    "OptimResult",
    "ParameterValidationError",
    "STATE_NAMES",
    "ScenarioConfig",
    "ShootingConfig",
    "SmoothStepContact",
    "SolveConfig",
    "StepContact",
    "TrainedModel",
    "TrainingProblem",
    "Trajectory",
    "TrajectoryEnsemble",
    "adam",
    "breach_day",
    "build_ensemble",
    "compare_methods",
    "coverage",
    "default_scenario",
    "ensemble_data",
    "evaluation_trajectory",
    "fit",
    "fit_ensemble",
    "icu_series",
    "latency_profile",
    "lbfgs",
    "loss_gradient",
    "loss_ms",
    "loss_ms_pem",
    "loss_parts",
    "loss_pem",
    "loss_ude",
    "mean_field",
    "minimize",
    "mse",
    "normalized_mse",
    "predicted_states",
    "project_feasible",
    "project_feasible_batch",
    "read_dataset",
    "read_trajectory",
    "simulate_ensemble",
    "simulate_realization",
    "solve",
    "spawn_seeds",
    "variance_weights",
    "write_dataset",
    "write_training_log",
    "write_trajectory",
]
