"""Model fitting: one training run, trained-model artifacts, ensembles.

A fit minimizes one strategy's loss over its flat trainable vector and
records a per-epoch log. Invalid parameter regions (mechanistic values
out of range, diverged solves) surface as rejected steps rather than
crashes. The resulting TrainedModel carries everything needed to
integrate the learned model later, without the training data.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .contact import NeuralContact
from .errors import DegeneratePopulationError, DivergenceError, EpikappaError, ParameterValidationError
from .losses import (
    LinearInterpolant,
    LossParts,
    ObservationSpec,
    ObserverSpec,
    ShootingConfig,
    TrainableLayout,
    TrainingProblem,
    loss_gradient,
    predicted_states,
)
from .optim import OptimBudget, minimize
from .params import D, EpiParams
from .tape import GradTape, ObserverSetup

SCHEMA_VERSION = 1

LOG_COLUMNS = ("epoch", "loss", "data", "continuity", "gain", "grad_norm", "wall_clock")


class EpochRecord(NamedTuple):
    epoch: int
    loss: float
    data: float
    continuity: float
    gain: float
    grad_norm: float
    wall_clock: float


def _config_payload(strategy: str, problem: TrainingProblem, budget: OptimBudget) -> dict:
    """Everything that defines a fit except the seed."""
    mask = problem.observer.mask
    bud = asdict(budget)
    bud.pop("seed")
    return {
        "strategy": strategy,
        "params": asdict(problem.params),
        "u0": problem.u0.tolist(),
        "t0": float(problem.t[0]),
        "dt": problem.dt,
        "n_obs": problem.n_obs,
        "kappa_max": problem.kappa_max,
        "h": problem.h,
        "theta_names": list(problem.theta_names),
        "obs": {
            "H": problem.obs.H.tolist(),
            "weights": problem.obs.weights.tolist(),
            "normalized": problem.obs.normalized,
        },
        "shooting": {
            "group_size": problem.shooting.group_size,
            "lambda_ms": problem.shooting.lambda_ms,
        },
        "observer": {
            "lambda_gain": problem.observer.lambda_gain,
            "lambda_sparse": problem.observer.lambda_sparse,
            "mask": None if mask is None else mask.tolist(),
        },
        "budget": bud,
    }


def config_hash(strategy: str, problem: TrainingProblem, budget: OptimBudget) -> str:
    payload = json.dumps(_config_payload(strategy, problem, budget), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class TrainedModel:
    """One trained surrogate plus the configuration that produced it."""

    strategy: str
    seed: int
    params: EpiParams  # learned mechanistic entries merged in
    u0: np.ndarray
    t0: float
    dt: float
    n_obs: int
    kappa_max: float
    h: float
    theta_names: tuple[str, ...]
    obs: ObservationSpec
    shooting: ShootingConfig
    observer: ObserverSpec
    budget: OptimBudget
    phi: np.ndarray
    theta: dict[str, float]
    nodes: np.ndarray  # (windows - 1, 7) shooting nodes, possibly empty
    gains: np.ndarray | None
    metrics: dict
    config_hash: str
    status: str
    history: list[EpochRecord] = field(default_factory=list)

    @property
    def n0(self) -> float:
        return float(self.params.N - self.u0[D])

    def contact(self) -> NeuralContact:
        return NeuralContact(self.phi, n0=self.n0, kappa_max=self.kappa_max)

    def daily_states(self, n_days: int | None = None, data=None, u0=None) -> np.ndarray:
        """Integrate the learned model forward; (n_days + 1, 7) daily states.

        ``data``: optional (t, y) observations. Strategies that learned
        observer gains are corrected along the data, as during training;
        otherwise the integration is plain. ``u0`` overrides the training
        initial state for what-if starts.
        """
        if n_days is None:
            n_days = self.n_obs - 1
        start = self.u0 if u0 is None else np.asarray(u0, dtype=float)
        if start.shape != self.u0.shape:
            raise ValueError(f"u0 must have shape {self.u0.shape}, got {start.shape}")
        observer = None
        if self.gains is not None and data is not None:
            t_obs, y_obs = data
            observer = ObserverSetup(
                gains=self.gains, H=self.obs.H, interp=LinearInterpolant(t_obs, y_obs)
            )
        tape = GradTape(
            self.params,
            self.phi,
            self.n0,
            kappa_max=self.kappa_max,
            h=self.h,
            observer=observer,
            project_steps=observer is not None,
        )
        saved = tape.forward(start[None, :], np.array([self.t0]), self.dt, n_days)
        return saved[:, 0, :]

    def time_grid(self, n_days: int | None = None) -> np.ndarray:
        if n_days is None:
            n_days = self.n_obs - 1
        return self.t0 + self.dt * np.arange(n_days + 1)

    def to_json(self) -> dict:
        bud = asdict(self.budget)
        mask = self.observer.mask
        return {
            "schema_version": SCHEMA_VERSION,
            "strategy": self.strategy,
            "seed": self.seed,
            "status": self.status,
            "config_hash": self.config_hash,
            "params": asdict(self.params),
            "scenario": {
                "u0": self.u0.tolist(),
                "t0": self.t0,
                "dt": self.dt,
                "n_obs": self.n_obs,
                "kappa_max": self.kappa_max,
                "h": self.h,
            },
            "configs": {
                "theta_names": list(self.theta_names),
                "obs": {
                    "H": self.obs.H.tolist(),
                    "weights": self.obs.weights.tolist(),
                    "normalized": self.obs.normalized,
                },
                "shooting": {
                    "group_size": self.shooting.group_size,
                    "lambda_ms": self.shooting.lambda_ms,
                },
                "observer": {
                    "lambda_gain": self.observer.lambda_gain,
                    "lambda_sparse": self.observer.lambda_sparse,
                    "mask": None if mask is None else mask.tolist(),
                },
                "budget": bud,
            },
            "metrics": self.metrics,
            "trainables": {
                "phi": self.phi.tolist(),
                "theta": self.theta,
                "nodes": self.nodes.tolist(),
                "gains": None if self.gains is None else self.gains.tolist(),
            },
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def from_json(cls, doc: dict) -> "TrainedModel":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise EpikappaError(
                f"unsupported model schema {doc.get('schema_version')!r}, "
                f"expected {SCHEMA_VERSION}"
            )
        sc = doc["scenario"]
        cfg = doc["configs"]
        obs_doc = cfg["obs"]
        gains = doc["trainables"]["gains"]
        mask = cfg["observer"]["mask"]
        return cls(
            strategy=doc["strategy"],
            seed=int(doc["seed"]),
            params=EpiParams.from_dict(doc["params"]),
            u0=np.asarray(sc["u0"], dtype=float),
            t0=float(sc["t0"]),
            dt=float(sc["dt"]),
            n_obs=int(sc["n_obs"]),
            kappa_max=float(sc["kappa_max"]),
            h=float(sc["h"]),
            theta_names=tuple(cfg["theta_names"]),
            obs=ObservationSpec(
                H=np.asarray(obs_doc["H"], dtype=float),
                weights=np.asarray(obs_doc["weights"], dtype=float),
                normalized=bool(obs_doc["normalized"]),
            ),
            shooting=ShootingConfig(**cfg["shooting"]),
            observer=ObserverSpec(
                lambda_gain=cfg["observer"]["lambda_gain"],
                lambda_sparse=cfg["observer"]["lambda_sparse"],
                mask=None if mask is None else np.asarray(mask, dtype=float),
            ),
            budget=OptimBudget(**cfg["budget"]),
            phi=np.asarray(doc["trainables"]["phi"], dtype=float),
            theta={k: float(v) for k, v in doc["trainables"]["theta"].items()},
            nodes=np.asarray(doc["trainables"]["nodes"], dtype=float).reshape(-1, 7),
            gains=None if gains is None else np.asarray(gains, dtype=float),
            metrics=doc["metrics"],
            config_hash=doc["config_hash"],
            status=doc["status"],
        )

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def write_training_log(path, history: list[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        writer.writerows(history)


def read_training_log(path) -> list[EpochRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != LOG_COLUMNS:
            raise EpikappaError(f"unexpected training-log header {header}")
        return [EpochRecord(int(r[0]), *map(float, r[1:])) for r in reader]


def fit(
    strategy: str,
    problem: TrainingProblem,
    budget: OptimBudget | None = None,
    init: np.ndarray | None = None,
) -> TrainedModel:
    """Train one surrogate: ADAM warm start then L-BFGS refinement.

    A non-finite loss halts training at the last finite iterate; an
    exhausted budget returns the best iterate seen, with the outcome
    recorded in ``status`` ("converged", "budget", "non-finite",
    "line-search").
    """
    budget = budget or OptimBudget()
    lay = TrainableLayout(strategy, problem)
    if init is None:
        vec0 = lay.init(np.random.default_rng(budget.seed))
    else:
        vec0 = np.array(init, dtype=float, copy=True)
        if vec0.shape != (lay.size,):
            raise ValueError(f"init must have {lay.size} entries, got {vec0.shape}")

    t_ref = time.perf_counter()
    history: list[EpochRecord] = []
    zero = np.zeros(lay.size)

    def fg(x):
        try:
            parts, grad = loss_gradient(strategy, x, problem)
        except (ParameterValidationError, DivergenceError, DegeneratePopulationError):
            return np.inf, zero, None
        return parts.total, grad, parts

    def record(x, f, gnorm, parts: LossParts):
        history.append(
            EpochRecord(
                len(history) + 1,
                f,
                parts.data,
                parts.continuity,
                parts.gain,
                gnorm,
                time.perf_counter() - t_ref,
            )
        )

    res = minimize(fg, vec0, budget, record)
    wall = time.perf_counter() - t_ref

    f_fin, g_fin, parts_fin = fg(res.x)
    if parts_fin is None:
        parts_fin = LossParts(np.inf, np.inf, np.inf, np.inf)
    phi, theta, nodes, gains = lay.unpack(res.x)
    params_fit = replace(problem.params, **theta) if theta else problem.params
    metrics = {
        "loss": float(parts_fin.total),
        "data": float(parts_fin.data),
        "continuity": float(parts_fin.continuity),
        "gain": float(parts_fin.gain),
        "grad_norm": float(np.linalg.norm(g_fin)),
        "wall_clock": wall,
        "n_epochs": len(history),
    }
    return TrainedModel(
        strategy=strategy,
        seed=budget.seed,
        params=params_fit,
        u0=problem.u0.copy(),
        t0=float(problem.t[0]),
        dt=problem.dt,
        n_obs=problem.n_obs,
        kappa_max=problem.kappa_max,
        h=problem.h,
        theta_names=problem.theta_names,
        obs=problem.obs,
        shooting=problem.shooting,
        observer=problem.observer,
        budget=budget,
        phi=phi.copy(),
        theta={k: float(v) for k, v in theta.items()},
        nodes=nodes.copy(),
        gains=None if gains is None else gains.copy(),
        metrics=metrics,
        config_hash=config_hash(strategy, problem, budget),
        status=res.status,
        history=history,
    )


def model_vector(model: TrainedModel, problem: TrainingProblem) -> np.ndarray:
    """Reassemble the flat trainable vector on the problem's layout.

    The problem's configs must match the ones the model was trained with
    (same windows, same trainable mechanistic entries).
    """
    lay = TrainableLayout(model.strategy, problem)
    vec = np.zeros(lay.size)
    vec[lay.phi_sl] = model.phi
    for i, name in enumerate(problem.theta_names):
        vec[lay.theta_sl][i] = model.theta[name]
    if lay.nodes_sl.stop > lay.nodes_sl.start:
        vec[lay.nodes_sl] = model.nodes.ravel()
    if model.gains is not None:
        vec[lay.gains_sl] = model.gains
    return vec


def evaluation_trajectory(model: TrainedModel, problem: TrainingProblem | None = None) -> np.ndarray:
    """Daily states used for scoring.

    Given the training problem, each strategy keeps its stabilization
    aid active: shooting windows are stitched from their learned nodes
    and observer strategies are corrected along the data. Without the
    problem, the free rollout from u0 is returned.
    """
    if problem is None:
        return model.daily_states()
    return predicted_states(model.strategy, model_vector(model, problem), problem)


@dataclass
class EnsembleSummary:
    """Across-seed trajectory statistics for one strategy."""

    strategy: str
    t: np.ndarray
    mean: np.ndarray  # (days + 1, 7)
    std: np.ndarray  # (days + 1, 7)
    models: list[TrainedModel]
    failures: list[tuple[int, str]]

    def band(self, n_sigma: float) -> tuple[np.ndarray, np.ndarray]:
        return self.mean - n_sigma * self.std, self.mean + n_sigma * self.std

    @property
    def n_requested(self) -> int:
        return len(self.models) + len(self.failures)


def spawn_seeds(base_seed: int, n: int) -> list[int]:
    """Independent child seeds from one base seed."""
    return [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(base_seed).spawn(n)]


def fit_ensemble(
    strategy: str,
    problem: TrainingProblem,
    budget: OptimBudget | None = None,
    n_seeds: int = 10,
    seeds: list[int] | None = None,
) -> EnsembleSummary:
    """Train independent models differing only in seed and summarize.

    Individual failures (raised errors or non-finite final losses) are
    recorded; the ensemble proceeds when at least 80% of seeds succeed.
    """
    budget = budget or OptimBudget()
    if seeds is None:
        seeds = spawn_seeds(budget.seed, n_seeds)
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ValueError("an ensemble needs at least two seeds")

    models: list[TrainedModel] = []
    failures: list[tuple[int, str]] = []
    trajectories = []
    for seed in seeds:
        try:
            model = fit(strategy, problem, replace(budget, seed=seed))
        except EpikappaError as exc:
            failures.append((seed, str(exc)))
            continue
        if not np.isfinite(model.metrics["loss"]):
            failures.append((seed, f"non-finite final loss ({model.status})"))
            continue
        models.append(model)
        trajectories.append(evaluation_trajectory(model, problem))

    if len(models) < 0.8 * len(seeds):
        raise EpikappaError(
            f"ensemble aborted: only {len(models)} of {len(seeds)} fits succeeded"
        )
    stack = np.stack(trajectories)
    return EnsembleSummary(
        strategy=strategy,
        t=problem.t.copy(),
        mean=stack.mean(axis=0),
        std=stack.std(axis=0),
        models=models,
        failures=failures,
    )
