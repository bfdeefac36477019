"""Deterministic ODE integration on a save-point grid.

Two methods: fixed-step classical RK4 (the default; static step structure,
exact linear-invariant preservation, reverse-mode friendly) and an adaptive
Dormand-Prince 5(4) pair with quartic dense output, kept for validation.
Integration is split exactly at a hard contact-rate change point so neither
method steps across the discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contact import ContactModel, StepContact, contact_rate
from .dynamics import mech_flow
from .errors import DivergenceError
from .params import EpiParams
from .simplex import is_feasible, project_feasible, project_feasible_batch

__all__ = ["SolveConfig", "Trajectory", "solve", "rk4_span"]


@dataclass(frozen=True)
class SolveConfig:
    method: str = "rk4"       # "rk4" or "dp54"
    h: float = 0.25           # fixed step, days (rk4)
    rtol: float = 1e-8        # adaptive relative tolerance (dp54)
    atol: float = 1e-10       # adaptive absolute tolerance (dp54)
    projection: str = "save"  # "save", "step" or "off"

    def __post_init__(self):
        if self.method not in ("rk4", "dp54"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.h <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise ValueError("step size and tolerances must be > 0")
        if self.projection not in ("save", "step", "off"):
            raise ValueError(f"unknown projection mode {self.projection!r}")


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray       # (K,), days
    states: np.ndarray  # (K, 7), persons

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        if self.states.shape != (self.t.size, 7):
            raise ValueError(f"states shape {self.states.shape} does not match grid {self.t.size}")


def _check_saveat(saveat: np.ndarray, t0: float) -> np.ndarray:
    saveat = np.asarray(saveat, dtype=float)
    if saveat.ndim != 1 or saveat.size < 1:
        raise ValueError("saveat must be a non-empty 1-D grid")
    if abs(saveat[0] - t0) > 1e-12:
        raise ValueError(f"saveat must start at t0={t0}, got {saveat[0]}")
    if saveat.size > 1 and np.min(np.diff(saveat)) <= 0:
        raise ValueError("saveat must be strictly increasing")
    return saveat


def rk4_span(U, t0: float, t1: float, h: float, f):
    """Advance a (B, 7) batch from t0 to t1 with fixed RK4 substeps.

    The substep count is rounded so the span endpoint is hit exactly.
    """
    span = t1 - t0
    n_sub = max(1, int(round(span / h)))
    hh = span / n_sub
    for i in range(n_sub):
        t = t0 + i * hh
        k1 = f(U, t)
        k2 = f(U + (0.5 * hh) * k1, t + 0.5 * hh)
        k3 = f(U + (0.5 * hh) * k2, t + 0.5 * hh)
        k4 = f(U + hh * k3, t + hh)
        U = U + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return U


# Dormand-Prince 5(4) tableau and dense-output weights
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_D = np.array([
    -12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
    701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423,
])


def _dp54_span(u, t0, t1, f, rtol, atol, save_ts, out_states, out_idx):
    """Adaptive DP5(4) over [t0, t1], filling save points from dense output."""
    t, h = t0, min(0.1, t1 - t0)
    k = np.empty((7, u.size))
    k[0] = f(u, t)
    next_save = out_idx
    while t < t1 - 1e-12:
        h = min(h, t1 - t)
        if h < 1e-12 * max(1.0, abs(t1 - t0)):
            raise DivergenceError("adaptive step size underflow", last_valid_time=t)
        for s in range(1, 7):
            k[s] = f(u + h * (_DP_A[s] @ k[:s]), t + _DP_C[s] * h)
        u_new = u + h * (_DP_B5 @ k)
        err = h * ((_DP_B5 - _DP_B4) @ k)
        scale = atol + rtol * np.maximum(np.abs(u), np.abs(u_new))
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
        if err_norm <= 1.0:
            ydiff = u_new - u
            rcont3 = h * k[0] - ydiff
            rcont4 = ydiff - h * k[6] - rcont3
            rcont5 = h * (_DP_D @ k)
            while next_save < save_ts.size and save_ts[next_save] <= t + h + 1e-12:
                th = np.clip((save_ts[next_save] - t) / h, 0.0, 1.0)
                th1 = 1.0 - th
                out_states[next_save] = u + th * (ydiff + th1 * (rcont3 + th * (rcont4 + th1 * rcont5)))
                next_save += 1
            t += h
            u = u_new
            k[0] = k[6]  # FSAL
        factor = 0.9 * err_norm ** -0.2 if err_norm > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return u, next_save


def solve(
    u0,
    t_span,
    params: EpiParams,
    contact: ContactModel,
    cfg: SolveConfig = SolveConfig(),
    saveat=None,
    correction=None,
) -> Trajectory:
    """Integrate the compartment system and return states at the save grid.

    ``correction(U, t)`` optionally adds an extra term to the flow (the
    observer innovation during PEM-style inference); with per-step
    projection it keeps states feasible despite the additive term.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"degenerate time span [{t0}, {t1}]")
    if saveat is None:
        saveat = np.arange(t0, t1 + 1e-9, 1.0)
    saveat = _check_saveat(saveat, t0)
    u = np.asarray(u0, dtype=float).copy()
    if u.shape != (7,):
        raise ValueError(f"u0 must have shape (7,), got {u.shape}")

    def make_flow(t_contact=None):
        # t_contact freezes the contact-rate clock so boundary stage
        # evaluations at a hard step change point stay on the correct side
        def flow(U, t):
            tk = t if t_contact is None else t_contact
            kappa = np.atleast_1d(np.asarray(contact_rate(contact, U, tk), dtype=float))
            dU = mech_flow(U, kappa, params)
            if correction is not None:
                dU = dU + correction(U, t)
            return dU

        return flow

    hard_step = isinstance(contact, StepContact)
    flow = make_flow()

    def span_flow(lo, hi):
        return make_flow(0.5 * (lo + hi)) if hard_step else flow

    project_states = cfg.projection != "off"

    def fix(U):
        if project_states and not is_feasible(U, params.N):
            return project_feasible_batch(U, params.N)
        return U

    # split spans exactly at a hard step change point
    breakpoints = []
    if hard_step and t0 < contact.t_ld < t1:
        breakpoints = [contact.t_ld]

    states = np.empty((saveat.size, 7))
    states[0] = fix(u[None, :])[0]
    if cfg.method == "rk4":
        U = states[0][None, :].copy()
        for i in range(1, saveat.size):
            a, b = saveat[i - 1], saveat[i]
            cuts = [c for c in breakpoints if a < c < b]
            for lo, hi in zip([a] + cuts, cuts + [b]):
                f_span = span_flow(lo, hi)
                if cfg.projection == "step":
                    span = hi - lo
                    n_sub = max(1, int(round(span / cfg.h)))
                    hh = span / n_sub
                    for s in range(n_sub):
                        U = fix(rk4_span(U, lo + s * hh, lo + (s + 1) * hh, hh, f_span))
                else:
                    U = rk4_span(U, lo, hi, cfg.h, f_span)
            if not np.all(np.isfinite(U)):
                raise DivergenceError("non-finite state", last_valid_time=saveat[i - 1])
            U = fix(U)
            states[i] = U[0]
    else:
        u_cur = states[0].copy()
        idx = 1
        spans = [t0] + breakpoints + [t1]
        for lo, hi in zip(spans[:-1], spans[1:]):
            f_lohi = span_flow(lo, hi)

            def f1(y, t, _f=f_lohi):
                return _f(y[None, :], t)[0]

            u_cur, idx = _dp54_span(u_cur, lo, hi, f1, cfg.rtol, cfg.atol, saveat, states, idx)
        if idx < saveat.size:  # endpoint save not emitted by dense output
            states[idx] = u_cur
            idx += 1
        if project_states:
            states[1:] = project_feasible_batch(states[1:], params.N)
    return Trajectory(saveat, states)
