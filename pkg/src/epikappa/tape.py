"""Reverse-mode differentiation through the fixed-step integrator.

The forward pass records every RK4 stage of a batched integration (one row
per shooting window; a single row for whole-horizon fits) and the backward
pass accumulates exact sensitivities of any function of the daily states
with respect to the network weights, the initial states, the observer
gains, and an optional subset of mechanistic parameters. This
differentiates the numerical scheme as computed, so gradients match
central differences on the discrete loss rather than a continuous adjoint.

Rows may have different window lengths. Rows past their own span are
frozen at their final state so stray arithmetic can never leak non-finite
values into the shared parameter gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import mlp
from .errors import DivergenceError
from .params import D, E, IA, INS, IS, EpiParams, S
from .simplex import is_feasible, project_feasible_batch, projection_vjp

# mechanistic entries eligible for gradient-based fitting
THETA_NAMES = ("p_t", "eta_p", "eta_a", "f_a", "f_r", "T_E", "T_inc", "T_inf")


@dataclass(frozen=True)
class ObserverSetup:
    """Innovation term K(y(t) - H u) with diagonal state gains.

    ``interp`` maps per-row times (B,) to interpolated observations (B, J).
    """

    gains: np.ndarray  # (7,)
    H: np.ndarray  # (J, 7)
    interp: Callable[[np.ndarray], np.ndarray]


@dataclass
class TapeGrads:
    phi: np.ndarray  # (301,)
    u0: np.ndarray  # (B, 7) sensitivity of the per-row initial states
    gains: np.ndarray | None  # (7,) when an observer is attached
    theta: np.ndarray  # (len(theta_names),)


class GradTape:
    """One recorded forward integration plus its reverse sweep.

    The tape is single use per ``forward``/``backward`` pair but may be
    rewound repeatedly; replaying ``forward`` with identical inputs is
    bit-identical because every operation is plain deterministic numpy.
    """

    def __init__(
        self,
        params: EpiParams,
        phi: np.ndarray,
        n0: float,
        kappa_max: float = 1.0,
        h: float = 0.25,
        observer: ObserverSetup | None = None,
        theta_names: tuple[str, ...] = (),
        project_steps: bool = False,
    ):
        self.params = params
        self.phi = np.asarray(phi, dtype=float).copy()
        self.weights = mlp.unflatten(self.phi)
        self.inv_n0 = 1.0 / float(n0)
        self.kappa_max = float(kappa_max)
        self.h = float(h)
        self.observer = observer
        self.theta_names = tuple(theta_names)
        unknown = set(self.theta_names) - set(THETA_NAMES)
        if unknown:
            raise ValueError(f"untrainable mechanistic entries: {sorted(unknown)}")
        self.project_steps = project_steps
        self._days = None

    # ------------------------------------------------------------------
    # forward

    def _stage(self, U: np.ndarray, t_vec: np.ndarray):
        p = self.params
        x = U[:, 1:] * self.inv_n0
        z, mcache = mlp.forward_cached(self.weights, x)
        sig = mlp.sigmoid(z)
        kappa = self.kappa_max * sig
        alive = p.N - U[:, D]
        mass = p.eta_p * U[:, INS] + U[:, IS] + p.eta_a * U[:, IA]
        lam = p.p_t * kappa * mass / alive
        infections = lam * U[:, S]
        out_E = U[:, E] / p.T_E
        out_Ins = U[:, INS] / p.T_Ins
        out_Is = U[:, IS] / p.T_s
        out_Ia = U[:, IA] / p.T_inf
        dU = np.empty_like(U)
        dU[:, S] = -infections
        dU[:, E] = infections - out_E
        dU[:, INS] = (1.0 - p.f_a) * out_E - out_Ins
        dU[:, IS] = out_Ins - out_Is
        dU[:, IA] = p.f_a * out_E - out_Ia
        dU[:, 5] = p.f_r * out_Is + out_Ia
        dU[:, D] = (1.0 - p.f_r) * out_Is
        HtR = None
        if self.observer is not None:
            y = self.observer.interp(t_vec)
            r = y - U @ self.observer.H.T
            HtR = r @ self.observer.H
            dU = dU + HtR * self.observer.gains[None, :]
        return dU, (U, kappa, lam, sig, mcache, HtR)

    def forward(
        self,
        U0: np.ndarray,
        t0_vec: np.ndarray,
        dt: float,
        n_days: int,
        spans: np.ndarray | None = None,
    ) -> np.ndarray:
        """Integrate B rows for n_days intervals of length dt; save each node.

        ``spans`` gives per-row day counts; rows are frozen once their span
        ends. Returns the saved states, shape (n_days + 1, B, 7).
        """
        U = np.array(U0, dtype=float, copy=True)
        B = U.shape[0]
        t0_vec = np.asarray(t0_vec, dtype=float)
        if spans is None:
            spans = np.full(B, n_days)
        spans = np.asarray(spans)
        n_sub = max(1, int(round(dt / self.h)))
        hh = dt / n_sub

        saved = np.empty((n_days + 1, B, 7))
        saved[0] = U
        days = []
        for d in range(n_days):
            live = spans > d
            all_live = bool(live.all())
            base = t0_vec + d * dt
            steps = []
            U_day_start = U
            # divergence surfaces as DivergenceError below; let inf/nan flow
            with np.errstate(over="ignore", invalid="ignore"):
                for s in range(n_sub):
                    t = base + s * hh
                    k1, c1 = self._stage(U, t)
                    U2 = U + (0.5 * hh) * k1
                    k2, c2 = self._stage(U2, t + 0.5 * hh)
                    U3 = U + (0.5 * hh) * k2
                    k3, c3 = self._stage(U3, t + 0.5 * hh)
                    U4 = U + hh * k3
                    k4, c4 = self._stage(U4, t + hh)
                    U = U + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    active = None
                    if self.project_steps and not is_feasible(U, self.params.N):
                        U = project_feasible_batch(U, self.params.N)
                        active = U > 0.0
                    steps.append((c1, c2, c3, c4, active))
            if not all_live:
                U = np.where(live[:, None], U, U_day_start)
            bad = live & ~np.isfinite(U).all(axis=1)
            if bad.any():
                w = int(np.argmax(bad))
                raise DivergenceError(
                    "non-finite state during taped solve",
                    last_valid_time=float(base[w]),
                    window=w,
                )
            saved[d + 1] = U
            days.append((hh, live if not all_live else None, steps))
        self._days = days
        self._shape = (n_days, B)
        return saved

    # ------------------------------------------------------------------
    # reverse

    def _stage_vjp(self, cache, Ubar, g_phi, g_gains, g_theta):
        p = self.params
        U, kappa, lam, sig, mcache, HtR = cache
        out = np.zeros_like(U)

        if self.observer is not None:
            # dU += (r @ H) * gains with r = y - U @ H.T
            g_gains += (Ubar * HtR).sum(axis=0)
            r_bar = (Ubar * self.observer.gains[None, :]) @ self.observer.H.T
            out -= r_bar @ self.observer.H

        inf_bar = Ubar[:, E] - Ubar[:, S]
        outE_bar = -Ubar[:, E] + (1.0 - p.f_a) * Ubar[:, INS] + p.f_a * Ubar[:, IA]
        outIns_bar = -Ubar[:, INS] + Ubar[:, IS]
        outIs_bar = -Ubar[:, IS] + p.f_r * Ubar[:, 5] + (1.0 - p.f_r) * Ubar[:, D]
        outIa_bar = -Ubar[:, IA] + Ubar[:, 5]

        out[:, E] += outE_bar / p.T_E
        out[:, INS] += outIns_bar / p.T_Ins
        out[:, IS] += outIs_bar / p.T_s
        out[:, IA] += outIa_bar / p.T_inf

        alive = p.N - U[:, D]
        mass = p.eta_p * U[:, INS] + U[:, IS] + p.eta_a * U[:, IA]
        lam_bar = inf_bar * U[:, S]
        out[:, S] += inf_bar * lam
        kappa_bar = lam_bar * p.p_t * mass / alive
        mass_bar = lam_bar * p.p_t * kappa / alive
        out[:, D] += lam_bar * lam / alive  # alive shrinks as D grows
        out[:, INS] += mass_bar * p.eta_p
        out[:, IS] += mass_bar
        out[:, IA] += mass_bar * p.eta_a

        z_bar = kappa_bar * self.kappa_max * sig * (1.0 - sig)
        x_bar = mlp.vjp(self.weights, mcache, z_bar, g_phi)
        out[:, 1:] += x_bar * self.inv_n0

        if g_theta.size:
            out_E = U[:, E] / p.T_E
            out_Ins = U[:, INS] / p.T_Ins
            out_Is = U[:, IS] / p.T_s
            out_Ia = U[:, IA] / p.T_inf
            for i, name in enumerate(self.theta_names):
                if name == "p_t":
                    g_theta[i] += float(lam_bar @ (kappa * mass / alive))
                elif name == "eta_p":
                    g_theta[i] += float(mass_bar @ U[:, INS])
                elif name == "eta_a":
                    g_theta[i] += float(mass_bar @ U[:, IA])
                elif name == "f_a":
                    g_theta[i] += float((Ubar[:, IA] - Ubar[:, INS]) @ out_E)
                elif name == "f_r":
                    g_theta[i] += float((Ubar[:, 5] - Ubar[:, D]) @ out_Is)
                elif name == "T_E":
                    g_theta[i] += float(
                        -outE_bar @ (out_E / p.T_E)
                        + outIns_bar @ (out_Ins / p.T_Ins)
                        - outIs_bar @ (out_Is / p.T_s)
                    )
                elif name == "T_inc":
                    g_theta[i] += float(
                        -outIns_bar @ (out_Ins / p.T_Ins)
                        + outIs_bar @ (out_Is / p.T_s)
                    )
                elif name == "T_inf":
                    g_theta[i] += float(
                        -outIs_bar @ (out_Is / p.T_s)
                        - outIa_bar @ (out_Ia / p.T_inf)
                    )
        return out

    def backward(self, saved_bar: np.ndarray) -> TapeGrads:
        """Pull sensitivities of the saved daily states back to the inputs."""
        if self._days is None:
            raise RuntimeError("backward called before forward")
        n_days, B = self._shape
        if saved_bar.shape != (n_days + 1, B, 7):
            raise ValueError(f"adjoint seed has shape {saved_bar.shape}")
        g_phi = np.zeros(mlp.N_PARAMS)
        g_gains = np.zeros(7) if self.observer is not None else None
        g_theta = np.zeros(len(self.theta_names))

        Ubar = saved_bar[n_days].copy()
        for d in range(n_days - 1, -1, -1):
            hh, live, steps = self._days[d]
            frozen_bar = None
            if live is not None:
                frozen_bar = np.where(live[:, None], 0.0, Ubar)
                Ubar = np.where(live[:, None], Ubar, 0.0)
            for c1, c2, c3, c4, active in reversed(steps):
                if active is not None:
                    Ubar = projection_vjp(Ubar, active)
                k4_bar = (hh / 6.0) * Ubar
                U4_bar = self._stage_vjp(c4, k4_bar, g_phi, g_gains, g_theta)
                k3_bar = (hh / 3.0) * Ubar + hh * U4_bar
                U3_bar = self._stage_vjp(c3, k3_bar, g_phi, g_gains, g_theta)
                k2_bar = (hh / 3.0) * Ubar + (0.5 * hh) * U3_bar
                U2_bar = self._stage_vjp(c2, k2_bar, g_phi, g_gains, g_theta)
                k1_bar = (hh / 6.0) * Ubar + (0.5 * hh) * U2_bar
                U1_bar = self._stage_vjp(c1, k1_bar, g_phi, g_gains, g_theta)
                Ubar = Ubar + U1_bar + U2_bar + U3_bar + U4_bar
            if frozen_bar is not None:
                Ubar = Ubar + frozen_bar
            Ubar = Ubar + saved_bar[d]
        return TapeGrads(phi=g_phi, u0=Ubar, gains=g_gains, theta=g_theta)
