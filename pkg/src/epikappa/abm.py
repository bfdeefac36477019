"""Stochastic compartmental simulator: binomial tau-leap ensembles.

Stands in for an agent-based model at desk scale. Every substep draws
each outflow binomially with p = 1 - exp(-rate * dt); competing outflows
(E branching into the two infectious routes, Is resolving to recovery or
death) come from one joint multinomial draw. Counts therefore stay
integers, the population total is conserved exactly, and D never
decreases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contact import ContactModel, contact_rate
from .errors import GridMismatchError
from .params import EpiParams, N_STATES

DEFAULT_QUANTILE_PAIRS = ((10, 90), (25, 75))


def _substeps_per_day(dt: float) -> int:
    if not 0 < dt <= 0.5:
        raise ValueError(f"dt must lie in (0, 0.5] day, got {dt}")
    n_sub = int(round(1.0 / dt))
    if abs(n_sub * dt - 1.0) > 1e-9:
        raise ValueError(f"dt must divide one day evenly, got {dt}")
    return n_sub


def _integer_state(u0, N: float) -> np.ndarray:
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (N_STATES,):
        raise ValueError(f"u0 must be ({N_STATES},), got {u0.shape}")
    if np.any(u0 < 0) or np.any(u0 != np.round(u0)):
        raise ValueError("u0 must hold nonnegative integer counts")
    pop = int(round(N))
    if abs(N - pop) > 1e-9 or int(u0.sum()) != pop:
        raise ValueError(f"u0 must sum to the integer population N={N}")
    return u0.astype(np.int64)


def simulate_realization(
    params: EpiParams,
    contact: ContactModel,
    u0,
    horizon: int = 89,
    dt: float = 0.1,
    seed=0,
) -> np.ndarray:
    """One realization of daily counts, shape (horizon + 1, 7), integer.

    ``seed`` may be an int, a SeedSequence, or a Generator; the same seed
    reproduces the realization exactly.
    """
    n_sub = _substeps_per_day(dt)
    state = _integer_state(u0, params.N)
    rng = np.random.default_rng(seed)
    pop = int(round(params.N))

    # per-substep leave probabilities for the linear stages
    p_leave_E = -np.expm1(-dt / params.T_E)
    p_ins_is = -np.expm1(-dt / params.T_Ins)
    p_leave_Is = -np.expm1(-dt / params.T_s)
    p_ia_r = -np.expm1(-dt / params.T_inf)
    # joint splits; the stay probability goes last so float slack lands there
    pv_E = [p_leave_E * (1.0 - params.f_a), p_leave_E * params.f_a, 1.0 - p_leave_E]
    pv_Is = [p_leave_Is * params.f_r, p_leave_Is * (1.0 - params.f_r), 1.0 - p_leave_Is]

    out = np.empty((horizon + 1, N_STATES), dtype=np.int64)
    out[0] = state
    for day in range(horizon):
        for s in range(n_sub):
            t = day + s * dt
            S_, E_, Ins_, Is_, Ia_, R_, D_ = (int(v) for v in state)
            alive = pop - D_
            if alive > 0 and S_ > 0:
                kappa = float(contact_rate(contact, state, t))
                lam = (
                    params.p_t
                    * kappa
                    * (params.eta_p * Ins_ + Is_ + params.eta_a * Ia_)
                    / alive
                )
                new_E = int(rng.binomial(S_, -np.expm1(-lam * dt)))
            else:
                new_E = 0
            e_ins, e_ia, _ = rng.multinomial(E_, pv_E)
            ins_is = int(rng.binomial(Ins_, p_ins_is))
            is_r, is_d, _ = rng.multinomial(Is_, pv_Is)
            ia_r = int(rng.binomial(Ia_, p_ia_r))
            state = np.array(
                [
                    S_ - new_E,
                    E_ + new_E - e_ins - e_ia,
                    Ins_ + e_ins - ins_is,
                    Is_ + ins_is - is_r - is_d,
                    Ia_ + e_ia - ia_r,
                    R_ + is_r + ia_r,
                    D_ + is_d,
                ],
                dtype=np.int64,
            )
        out[day + 1] = state
    return out


@dataclass
class TrajectoryEnsemble:
    """Realization stack with per-day mean and quantile envelopes."""

    t: np.ndarray  # (K + 1,) day grid
    realizations: np.ndarray  # (R, K + 1, 7) integer counts
    mean: np.ndarray  # (K + 1, 7)
    quantiles: dict[int, np.ndarray]  # percent -> (K + 1, 7)

    @property
    def n_realizations(self) -> int:
        return self.realizations.shape[0]

    def envelope(self, lo: int = 10, hi: int = 90) -> tuple[np.ndarray, np.ndarray]:
        for q in (lo, hi):
            if q not in self.quantiles:
                raise ValueError(
                    f"quantile {q} not computed; available: {sorted(self.quantiles)}"
                )
        if lo >= hi:
            raise ValueError(f"need lo < hi, got ({lo}, {hi})")
        return self.quantiles[lo], self.quantiles[hi]


def build_ensemble(
    realizations,
    t: np.ndarray | None = None,
    quantile_pairs=DEFAULT_QUANTILE_PAIRS,
) -> TrajectoryEnsemble:
    """Aggregate equal-grid realizations into mean and quantile envelopes.

    Quantiles follow the linear-interpolation rule between order
    statistics (numpy's default).
    """
    reals = [np.asarray(r) for r in realizations]
    if len(reals) < 2:
        raise ValueError("need at least two realizations")
    shape = reals[0].shape
    for i, r in enumerate(reals):
        if r.shape != shape:
            raise GridMismatchError(
                f"realization {i} has shape {r.shape}, expected {shape}"
            )
    stack = np.stack(reals)
    if t is None:
        t = np.arange(shape[0], dtype=float)
    t = np.asarray(t, dtype=float)
    if t.shape != (shape[0],):
        raise GridMismatchError(f"t must be ({shape[0]},), got {t.shape}")

    percents = sorted({q for pair in quantile_pairs for q in pair})
    for lo, hi in quantile_pairs:
        if not (0 <= lo < hi <= 100):
            raise ValueError(f"bad quantile pair ({lo}, {hi})")
    quantiles = {int(q): np.percentile(stack, q, axis=0) for q in percents}
    return TrajectoryEnsemble(
        t=t,
        realizations=stack,
        mean=stack.mean(axis=0),
        quantiles=quantiles,
    )


def simulate_ensemble(
    params: EpiParams,
    contact: ContactModel,
    u0,
    horizon: int = 89,
    n_realizations: int = 100,
    dt: float = 0.1,
    master_seed: int = 0,
    quantile_pairs=DEFAULT_QUANTILE_PAIRS,
) -> TrajectoryEnsemble:
    """Independent realizations from seeds spawned off one master seed.

    Child seeds come from ``SeedSequence(master_seed).spawn``; realization
    i is reproducible on its own by passing child i to
    :func:`simulate_realization`.
    """
    if n_realizations < 2:
        raise ValueError("need at least two realizations")
    children = np.random.SeedSequence(master_seed).spawn(n_realizations)
    reals = [
        simulate_realization(params, contact, u0, horizon, dt, seed=c)
        for c in children
    ]
    return build_ensemble(reals, quantile_pairs=quantile_pairs)
