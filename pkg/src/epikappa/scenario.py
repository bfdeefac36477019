"""Scenario configurations tying together parameters, contact policy,
seeding, and the ICU proxy used for threshold displays.

A scenario is the unit the data generator, the sweep command, and the
service all consume. ICU load is not a state variable; it is displayed as
a configurable linear map of the symptomatic compartment (coefficient *
Is) purely for threshold bookkeeping.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .abm import TrajectoryEnsemble, simulate_ensemble
from .contact import ContactModel, SmoothStepContact, StepContact
from .errors import ParameterValidationError
from .params import N_STATES, EpiParams
from .solvers import SolveConfig, Trajectory, solve

DEFAULT_CONFIG_NAME = "default_scenario.json"
IS_INDEX = 3  # symptomatic compartment drives the ICU proxy


def build_contact(spec: dict) -> ContactModel:
    """Build a contact model from its JSON spec.

    Kinds: ``step`` (kappa1, kappa2, t_ld), ``smooth_step`` (adds width),
    ``constant`` (kappa).
    """
    kind = spec.get("kind")
    try:
        if kind == "step":
            return StepContact(
                float(spec["kappa1"]), float(spec["kappa2"]), float(spec["t_ld"])
            )
        if kind == "smooth_step":
            return SmoothStepContact(
                float(spec["kappa1"]),
                float(spec["kappa2"]),
                float(spec["t_ld"]),
                float(spec.get("width", 2.0)),
            )
        if kind == "constant":
            return StepContact(float(spec["kappa"]), float(spec["kappa"]), 0.0)
    except KeyError as exc:
        raise ParameterValidationError(f"contact spec missing field {exc}") from None
    raise ParameterValidationError(f"unknown contact kind {kind!r}")


def contact_spec(contact: ContactModel) -> dict:
    """Inverse of :func:`build_contact` for the step family."""
    if isinstance(contact, SmoothStepContact):
        return {
            "kind": "smooth_step",
            "kappa1": contact.kappa1,
            "kappa2": contact.kappa2,
            "t_ld": contact.t_ld,
            "width": contact.width,
        }
    if isinstance(contact, StepContact):
        return {
            "kind": "step",
            "kappa1": contact.kappa1,
            "kappa2": contact.kappa2,
            "t_ld": contact.t_ld,
        }
    raise ParameterValidationError(f"cannot serialize contact {type(contact).__name__}")


@dataclass
class ScenarioConfig:
    """Everything needed to regenerate a dataset or run a what-if solve."""

    name: str
    params: EpiParams
    contact: dict
    u0: np.ndarray
    horizon: int = 89
    n_realizations: int = 100
    dt: float = 0.1
    master_seed: int = 0
    icu_coefficient: float = 0.05
    icu_capacity: float = 150.0
    icu_threshold: float = 0.75  # fraction of capacity that counts as a breach

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=float)
        if self.u0.shape != (N_STATES,):
            raise ParameterValidationError(f"u0 must be ({N_STATES},), got {self.u0.shape}")
        if np.any(self.u0 < 0):
            raise ParameterValidationError("u0 must be nonnegative")
        if abs(self.u0.sum() - self.params.N) > 1e-6 * self.params.N:
            raise ParameterValidationError(
                f"u0 sums to {self.u0.sum()}, params say N={self.params.N}"
            )
        if self.horizon < 1:
            raise ParameterValidationError(f"horizon must be >= 1, got {self.horizon}")
        if not 0 < self.dt <= 0.5:
            raise ParameterValidationError(f"dt must be in (0, 0.5], got {self.dt}")
        if self.n_realizations < 2:
            raise ParameterValidationError("n_realizations must be >= 2")
        if self.icu_coefficient < 0:
            raise ParameterValidationError("icu_coefficient must be >= 0")
        if self.icu_capacity <= 0:
            raise ParameterValidationError("icu_capacity must be > 0")
        if not 0 < self.icu_threshold <= 1:
            raise ParameterValidationError(
                f"icu_threshold must be in (0, 1], got {self.icu_threshold}"
            )
        build_contact(self.contact)  # validate eagerly

    def contact_model(self) -> ContactModel:
        return build_contact(self.contact)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "params": dataclasses.asdict(self.params),
            "contact": dict(self.contact),
            "u0": [float(x) for x in self.u0],
            "horizon": self.horizon,
            "n_realizations": self.n_realizations,
            "dt": self.dt,
            "master_seed": self.master_seed,
            "icu_coefficient": self.icu_coefficient,
            "icu_capacity": self.icu_capacity,
            "icu_threshold": self.icu_threshold,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioConfig":
        return cls(
            name=doc["name"],
            params=EpiParams.from_dict(doc["params"]),
            contact=dict(doc["contact"]),
            u0=np.asarray(doc["u0"], dtype=float),
            horizon=int(doc["horizon"]),
            n_realizations=int(doc["n_realizations"]),
            dt=float(doc["dt"]),
            master_seed=int(doc["master_seed"]),
            icu_coefficient=float(doc.get("icu_coefficient", 0.05)),
            icu_capacity=float(doc.get("icu_capacity", 150.0)),
            icu_threshold=float(doc.get("icu_threshold", 0.75)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def default_scenario() -> ScenarioConfig:
    """The packaged two-phase epidemic every example and test starts from."""
    text = resources.files("epikappa").joinpath("configs", DEFAULT_CONFIG_NAME).read_text()
    return ScenarioConfig.from_json(json.loads(text))


def ensemble_data(config: ScenarioConfig) -> TrajectoryEnsemble:
    """Stochastic realizations plus envelopes for the scenario."""
    return simulate_ensemble(
        config.params,
        config.contact_model(),
        config.u0,
        horizon=config.horizon,
        n_realizations=config.n_realizations,
        dt=config.dt,
        master_seed=config.master_seed,
    )


def mean_field(config: ScenarioConfig, h: float = 0.1) -> Trajectory:
    """Deterministic daily trajectory for the scenario's contact policy."""
    return solve(
        config.u0,
        (0.0, float(config.horizon)),
        config.params,
        config.contact_model(),
        SolveConfig(method="rk4", h=h),
    )


def icu_series(states, coefficient: float) -> np.ndarray:
    """ICU proxy per day: coefficient * symptomatic count."""
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape[1] != N_STATES:
        raise ParameterValidationError(f"states must be (K, {N_STATES}), got {states.shape}")
    return coefficient * states[:, IS_INDEX]


def breach_day(t, observable, capacity: float, threshold: float):
    """First day the observable reaches threshold * capacity, else None."""
    t = np.asarray(t, dtype=float)
    observable = np.asarray(observable, dtype=float)
    if t.shape != observable.shape:
        raise ParameterValidationError("t and observable must share a grid")
    hit = np.nonzero(observable >= threshold * capacity)[0]
    return None if hit.size == 0 else float(t[hit[0]])
