"""Mechanistic parameter set and compartment-state containers.

The state vector order used everywhere in this package is

    u = (S, E, Ins, Is, Ia, R, D)

with ``Ins`` the presymptomatic infectious pool, ``D`` cumulative deaths
kept last so the first six entries are the living compartments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

import numpy as np

from .errors import ParameterValidationError

STATE_NAMES = ("S", "E", "Ins", "Is", "Ia", "R", "D")
N_STATES = 7
# indices into the state vector
S, E, INS, IS, IA, R, D = range(7)


@dataclass(frozen=True)
class EpiParams:
    """Mechanistic constants of the compartment flow.

    Durations are in days; ``T_E`` (latent), ``T_inc`` (incubation) and
    ``T_inf`` (total infectious) are the foundational inputs from which the
    presymptomatic and symptomatic stage durations are derived.
    """

    p_t: float = 0.35        # per-contact transmission probability
    eta_p: float = 0.75      # presymptomatic infectiousness weight
    eta_a: float = 0.75      # asymptomatic infectiousness weight
    T_E: float = 3.0         # latent period (days)
    T_inc: float = 5.0       # incubation period (days)
    T_inf: float = 7.0       # total infectious period (days)
    f_a: float = 0.4         # asymptomatic fraction
    f_r: float = 0.98        # recovery fraction among symptomatic
    N: float = 100_000.0     # total population

    def __post_init__(self):
        for name in ("T_E", "T_inc", "T_inf"):
            if getattr(self, name) <= 0:
                raise ParameterValidationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.T_inc < self.T_E:
            raise ParameterValidationError(
                f"T_inc >= T_E violated: T_inc={self.T_inc} < T_E={self.T_E}"
            )
        if self.T_inf <= self.T_inc - self.T_E:
            raise ParameterValidationError(
                "T_s > 0 violated: requires T_inf > T_inc - T_E, got "
                f"T_inf={self.T_inf}, T_inc - T_E={self.T_inc - self.T_E}"
            )
        for name in ("p_t", "eta_p", "eta_a", "f_a", "f_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.N <= 0:
            raise ParameterValidationError(f"N must be > 0, got {self.N}")

    @property
    def T_Ins(self) -> float:
        """Presymptomatic stage duration T_inc - T_E (days)."""
        return self.T_inc - self.T_E

    @property
    def T_s(self) -> float:
        """Symptomatic stage duration T_E + T_inf - T_inc (days)."""
        return self.T_E + self.T_inf - self.T_inc

    def to_json(self) -> str:
        return json.dumps({f.name: getattr(self, f.name) for f in fields(self)}, indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "EpiParams":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ParameterValidationError(
                f"unknown parameter field(s): {sorted(unknown)}; expected subset of {sorted(known)}"
            )
        return cls(**{k: float(v) for k, v in doc.items()})

    @classmethod
    def from_json(cls, text: str) -> "EpiParams":
        return cls.from_dict(json.loads(text))


def derived_durations(params: EpiParams) -> tuple[float, float]:
    """Return (T_Ins, T_s), the presymptomatic and symptomatic durations.

    Validation happens at ``EpiParams`` construction; this is the convenience
    accessor for the derived pair.
    """
    return params.T_Ins, params.T_s


@dataclass(frozen=True)
class CompartmentState:
    """A single 7-compartment state, in persons."""

    S: float
    E: float
    Ins: float
    Is: float
    Ia: float
    R: float
    D: float

    def to_array(self) -> np.ndarray:
        return np.array([self.S, self.E, self.Ins, self.Is, self.Ia, self.R, self.D], dtype=float)

    @classmethod
    def from_array(cls, u) -> "CompartmentState":
        u = np.asarray(u, dtype=float)
        if u.shape != (N_STATES,):
            raise ValueError(f"expected shape (7,), got {u.shape}")
        return cls(*u.tolist())

    @property
    def total(self) -> float:
        return self.S + self.E + self.Ins + self.Is + self.Ia + self.R + self.D


def validate_state(u: np.ndarray, N: float, mass_rtol: float = 1e-6) -> None:
    """Raise if ``u`` is outside the feasible set X_N beyond tolerance."""
    u = np.asarray(u, dtype=float)
    if u.shape != (N_STATES,):
        raise ValueError(f"expected shape (7,), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("state contains non-finite entries")
    if np.min(u) < -mass_rtol * N:
        raise ValueError(f"negative compartment: min={np.min(u)}")
    if abs(float(np.sum(u)) - N) > mass_rtol * N:
        raise ValueError(f"mass violation: sum={np.sum(u)} vs N={N}")
