"""Mechanistic right-hand side of the 7-compartment system.

Flow graph: S -> E -> Ins -> Is -> (R, D) with a parallel E -> Ia -> R
branch. The infection pressure couples S to the three infectious pools
through the force of infection; every other transition is linear. All
rates are per day.
"""

from __future__ import annotations

import numpy as np

from .contact import ContactModel, contact_rate
from .errors import DegeneratePopulationError
from .params import D, E, IA, INS, IS, EpiParams, S

__all__ = ["force_of_infection", "rhs", "mech_flow", "infection_pressure"]


def infection_pressure(U: np.ndarray, kappa, params: EpiParams):
    """Force of infection for a (B, 7) state batch given kappa of shape (B,)."""
    alive = params.N - U[:, D]
    mass = params.eta_p * U[:, INS] + U[:, IS] + params.eta_a * U[:, IA]
    return params.p_t * kappa * mass / alive


def mech_flow(U: np.ndarray, kappa, params: EpiParams, out: np.ndarray | None = None):
    """Compartment flow rates for a (B, 7) batch; components sum to zero."""
    lam = infection_pressure(U, kappa, params)
    infections = lam * U[:, S]
    out_E = U[:, E] / params.T_E
    out_Ins = U[:, INS] / params.T_Ins
    out_Is = U[:, IS] / params.T_s
    out_Ia = U[:, IA] / params.T_inf
    dU = out if out is not None else np.empty_like(U)
    dU[:, S] = -infections
    dU[:, E] = infections - out_E
    dU[:, INS] = (1.0 - params.f_a) * out_E - out_Ins
    dU[:, IS] = out_Ins - out_Is
    dU[:, IA] = params.f_a * out_E - out_Ia
    dU[:, 5] = params.f_r * out_Is + out_Ia
    dU[:, D] = (1.0 - params.f_r) * out_Is
    return dU


def force_of_infection(u, t, params: EpiParams, contact: ContactModel) -> float:
    """lambda(t) = p_t kappa(t) (eta_p Ins + Is + eta_a Ia) / (N - D)."""
    u = np.asarray(u, dtype=float)
    if params.N - u[D] <= 0:
        raise DegeneratePopulationError(
            f"living population N - D = {params.N - u[D]} <= 0"
        )
    kappa = float(np.asarray(contact_rate(contact, u, t)))
    return float(infection_pressure(u[None, :], kappa, params)[0])


def rhs(u, t, params: EpiParams, contact: ContactModel) -> np.ndarray:
    """Time derivative of the state vector (S, E, Ins, Is, Ia, R, D)."""
    u = np.asarray(u, dtype=float)
    if params.N - u[D] <= 0:
        raise DegeneratePopulationError(
            f"living population N - D = {params.N - u[D]} <= 0"
        )
    kappa = np.atleast_1d(np.asarray(contact_rate(contact, u, t), dtype=float))
    return mech_flow(u[None, :], kappa, params)[0]
