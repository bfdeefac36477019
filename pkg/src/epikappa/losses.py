"""The four training losses and their exact gradients.

Strategies: "ude" (single whole-horizon solve), "ms" (multiple shooting
windows with soft continuity), "pem" (observer-corrected solve with
learned diagonal gains), "mspem" (observer inside shooting windows).
All four share one evaluation engine so the documented reductions hold
bit for bit: mspem(gains=0, reg=0) = ms, ms(single window) = ude,
pem(gains=0, reg=0) = ude.

The data term is the variance-weighted mean squared residual over every
observation index (each index counted once, including t0); the continuity
term compares each window endpoint with the next window's initial node;
the gain term regularizes the observer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import mlp
from .params import D, EpiParams, N_STATES
from .tape import THETA_NAMES, GradTape, ObserverSetup

STRATEGIES = ("ude", "ms", "pem", "mspem")


# ----------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class ObservationSpec:
    """What is observed and how residuals are weighted.

    ``weights[j]`` multiplies series j inside the squared data residual
    (1/sigma_j for variance weighting). ``normalized`` states the loss in
    normalized rather than count units: residuals and continuity gaps are
    divided by the initial living population.
    """

    H: np.ndarray = field(default_factory=lambda: np.eye(N_STATES))
    weights: np.ndarray | None = None
    normalized: bool = False

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.ndim != 2 or H.shape[1] != N_STATES:
            raise ValueError(f"H must be (J, {N_STATES}), got {H.shape}")
        if np.any(H < 0):
            raise ValueError("H rows must select or aggregate nonnegatively")
        object.__setattr__(self, "H", H)
        w = self.weights
        w = np.ones(H.shape[0]) if w is None else np.asarray(w, dtype=float)
        if w.shape != (H.shape[0],) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per observed series")
        object.__setattr__(self, "weights", w)

    @property
    def n_series(self) -> int:
        return self.H.shape[0]

    def is_identity(self) -> bool:
        return self.H.shape[0] == N_STATES and np.array_equal(self.H, np.eye(N_STATES))


@dataclass(frozen=True)
class ShootingConfig:
    """Window partition and continuity weight for multiple shooting."""

    group_size: int = 11  # observation indices per window
    lambda_ms: float = 10.0

    def __post_init__(self):
        if self.group_size < 1:
            raise ValueError(f"group_size must be >= 1, got {self.group_size}")
        if self.lambda_ms <= 0:
            raise ValueError(f"lambda_ms must be > 0, got {self.lambda_ms}")


@dataclass(frozen=True)
class ObserverSpec:
    """Diagonal-gain observer regularization: lambda_gain ||K||_F^2 +
    lambda_sparse ||M * K||_1 with K = diag(gains) @ H^T."""

    lambda_gain: float = 1e-3
    lambda_sparse: float = 0.0
    mask: np.ndarray | None = None  # (7, J), ones when omitted

    def __post_init__(self):
        if self.lambda_gain < 0 or self.lambda_sparse < 0:
            raise ValueError("regularizer weights must be >= 0")
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=float)
            if not np.isin(m, (0.0, 1.0)).all():
                raise ValueError("mask entries must be 0 or 1")
            object.__setattr__(self, "mask", m)


@dataclass(frozen=True)
class TrainingProblem:
    """Frozen description of one fit: scenario, data, and loss configs."""

    params: EpiParams
    t: np.ndarray  # (K+1,) uniformly spaced observation times
    y: np.ndarray  # (K+1, J) observed series
    u0: np.ndarray  # (7,) known initial state
    obs: ObservationSpec = field(default_factory=ObservationSpec)
    shooting: ShootingConfig = field(default_factory=ShootingConfig)
    observer: ObserverSpec = field(default_factory=ObserverSpec)
    kappa_max: float = 1.0
    h: float = 0.25
    theta_names: tuple[str, ...] = ()

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float)
        u0 = np.asarray(self.u0, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("need at least two observation times")
        dt = np.diff(t)
        if np.any(dt <= 0) or abs(dt.max() - dt.min()) > 1e-9:
            raise ValueError("observation grid must be uniform and increasing")
        if y.shape != (t.size, self.obs.n_series):
            raise ValueError(f"y must be {(t.size, self.obs.n_series)}, got {y.shape}")
        if u0.shape != (N_STATES,):
            raise ValueError(f"u0 must be ({N_STATES},), got {u0.shape}")
        if not np.isfinite(y).all() or not np.isfinite(u0).all():
            raise ValueError("observations and u0 must be finite")
        unknown = set(self.theta_names) - set(THETA_NAMES)
        if unknown:
            raise ValueError(f"untrainable mechanistic entries: {sorted(unknown)}")
        for name, arr in (("t", t), ("y", y), ("u0", u0)):
            object.__setattr__(self, name, arr)

    @property
    def n_obs(self) -> int:
        return self.t.size

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def n0(self) -> float:
        """Living population at t0; input normalization constant."""
        return float(self.params.N - self.u0[D])


def variance_weights(y: np.ndarray, rel_floor: float = 1e-6) -> np.ndarray:
    """Per-series 1/std weights with a floor so flat series stay finite."""
    sig = np.std(np.asarray(y, dtype=float), axis=0)
    top = sig.max()
    if top <= 0:
        return np.ones(y.shape[1])
    return 1.0 / np.maximum(sig, rel_floor * top)


# ----------------------------------------------------------------------
# shooting windows and node parameterization


def window_starts(n_obs: int, group_size: int) -> list[int]:
    """Start indices of contiguous windows; the last absorbs any remainder."""
    starts = list(range(0, n_obs, group_size))
    while len(starts) > 1 and n_obs - starts[-1] < 3:
        starts.pop()
    return starts


def reconstruct_z(w: np.ndarray, delta: float, N: float) -> np.ndarray:
    """Feasible state from free parameters: exact mass N by construction.

    Living compartments split (N - D) by softmax(w); D = N * sigmoid(delta).
    """
    w = np.asarray(w, dtype=float)
    pi = np.exp(w - w.max())
    pi /= pi.sum()
    dead = N * mlp.sigmoid(delta)
    z = np.empty(N_STATES)
    z[:6] = (N - dead) * pi
    z[6] = dead
    return z


def reconstruct_z_vjp(w: np.ndarray, delta: float, N: float, z_bar: np.ndarray):
    """Pull a state sensitivity back to (w, delta)."""
    w = np.asarray(w, dtype=float)
    pi = np.exp(w - w.max())
    pi /= pi.sum()
    s = mlp.sigmoid(delta)
    dead = N * s
    living_bar = z_bar[:6]
    dead_bar = float(z_bar[6]) - float(pi @ living_bar)
    pi_bar = (N - dead) * living_bar
    w_bar = pi * (pi_bar - float(pi @ pi_bar))
    delta_bar = dead_bar * N * s * (1.0 - s)
    return w_bar, delta_bar


def anchor_nodes(problem: TrainingProblem, starts: list[int]) -> np.ndarray:
    """Initial (w_i, delta_i) for windows i > 1, anchored to the data.

    With identity observations the anchoring inverts the softmax/sigmoid
    parameterization at each window start, so the reconstructed node
    reproduces the observed proportions. Without full-state observations
    the nodes fall back to uniform living mass and near-zero deaths.
    """
    N = problem.params.N
    nodes = np.zeros((len(starts) - 1, 7))
    for i, s in enumerate(starts[1:]):
        if problem.obs.is_identity():
            y = np.maximum(problem.y[s], 1e-8 * N)
            nodes[i, :6] = np.log(y[:6])
            frac = min(max(y[6] / N, 1e-8), 1.0 - 1e-8)
            nodes[i, 6] = np.log(frac / (1.0 - frac))
        else:
            nodes[i, 6] = -6.0
    return nodes.ravel()


# ----------------------------------------------------------------------
# trainable vector layout


class TrainableLayout:
    """Coordinate blocks of one strategy's flat trainable vector.

    Order: network weights, then selected mechanistic entries, then
    shooting nodes (w_i, delta_i per window i > 1), then observer gains.
    """

    def __init__(self, strategy: str, problem: TrainingProblem):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self.problem = problem
        self.starts = (
            window_starts(problem.n_obs, problem.shooting.group_size)
            if strategy in ("ms", "mspem")
            else [0]
        )
        n_theta = len(problem.theta_names)
        n_nodes = 7 * (len(self.starts) - 1)
        n_gains = 7 if strategy in ("pem", "mspem") else 0
        off = 0
        self.phi_sl = slice(off, off + mlp.N_PARAMS)
        off += mlp.N_PARAMS
        self.theta_sl = slice(off, off + n_theta)
        off += n_theta
        self.nodes_sl = slice(off, off + n_nodes)
        off += n_nodes
        self.gains_sl = slice(off, off + n_gains)
        off += n_gains
        self.size = off

    def init(self, rng: np.random.Generator) -> np.ndarray:
        """phi uniform, theta at current values, nodes anchored, gains zero."""
        vec = np.zeros(self.size)
        vec[self.phi_sl] = mlp.init_params(rng)
        for i, name in enumerate(self.problem.theta_names):
            vec[self.theta_sl][i] = getattr(self.problem.params, name)
        if self.nodes_sl.stop > self.nodes_sl.start:
            vec[self.nodes_sl] = anchor_nodes(self.problem, self.starts)
        return vec

    def unpack(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise ValueError(f"expected {self.size} trainables, got {vec.shape}")
        phi = vec[self.phi_sl]
        theta = dict(zip(self.problem.theta_names, vec[self.theta_sl]))
        nodes = vec[self.nodes_sl].reshape(-1, 7)
        gains = vec[self.gains_sl] if self.gains_sl.stop > self.gains_sl.start else None
        return phi, theta, nodes, gains


class LossParts(NamedTuple):
    total: float
    data: float
    continuity: float
    gain: float


class LinearInterpolant:
    """Piecewise-linear interpolation of the observed series, clamped at
    the ends; vectorized over a batch of query times."""

    def __init__(self, t: np.ndarray, y: np.ndarray):
        self.t = np.asarray(t, dtype=float)
        self.y = np.asarray(y, dtype=float)

    def __call__(self, t_query: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.t, t_query, side="right") - 1
        idx = np.clip(idx, 0, self.t.size - 2)
        lo, hi = self.t[idx], self.t[idx + 1]
        w = np.clip((t_query - lo) / (hi - lo), 0.0, 1.0)
        return self.y[idx] * (1.0 - w[:, None]) + self.y[idx + 1] * w[:, None]


# ----------------------------------------------------------------------
# evaluation engine


def _gain_regularizer(gains, spec: ObserverSpec, H):
    hcol2 = (H**2).sum(axis=0)  # ||K||_F^2 = sum_j gains_j^2 ||H[:, j]||^2
    mask = spec.mask if spec.mask is not None else np.ones((N_STATES, H.shape[0]))
    mrow = (mask * np.abs(H.T)).sum(axis=1)
    value = spec.lambda_gain * float(gains**2 @ hcol2)
    value += spec.lambda_sparse * float(np.abs(gains) @ mrow)
    grad = 2.0 * spec.lambda_gain * gains * hcol2
    grad += spec.lambda_sparse * np.sign(gains) * mrow
    return value, grad


def _forward_windows(lay: TrainableLayout, vec: np.ndarray, problem: TrainingProblem):
    """Shared forward pass: window starts/spans, initial nodes, taped solve."""
    phi, theta, nodes, gains = lay.unpack(vec)
    params = replace(problem.params, **theta) if theta else problem.params

    starts = lay.starts
    n_w = len(starts)
    last = problem.n_obs - 1
    spans = np.array(
        [starts[i + 1] - starts[i] for i in range(n_w - 1)] + [last - starts[-1]]
    )
    Z0 = np.empty((n_w, 7))
    Z0[0] = problem.u0
    for i in range(1, n_w):
        Z0[i] = reconstruct_z(nodes[i - 1, :6], nodes[i - 1, 6], params.N)

    observer = None
    if gains is not None:
        observer = ObserverSetup(
            gains=gains, H=problem.obs.H, interp=LinearInterpolant(problem.t, problem.y)
        )
    tape = GradTape(
        params,
        phi,
        problem.n0,
        kappa_max=problem.kappa_max,
        h=problem.h,
        observer=observer,
        theta_names=problem.theta_names,
        project_steps=observer is not None,
    )
    saved = tape.forward(
        Z0, problem.t[starts], problem.dt, int(spans.max()), spans=spans
    )
    return phi, nodes, gains, params, starts, spans, Z0, tape, saved


def predicted_states(strategy: str, vec: np.ndarray, problem: TrainingProblem) -> np.ndarray:
    """Training-horizon reconstruction, (n_obs, 7) daily states.

    Each strategy's stabilization aid stays active: shooting strategies
    stitch windows integrated from their learned nodes, observer
    strategies correct along the data. Plain "ude" is the free rollout
    from u0.
    """
    lay = TrainableLayout(strategy, problem)
    _, _, _, _, starts, spans, _, _, saved = _forward_windows(lay, vec, problem)
    out = np.empty((problem.n_obs, N_STATES))
    for i, s in enumerate(starts):
        e = starts[i + 1] - 1 if i < len(starts) - 1 else problem.n_obs - 1
        out[s : e + 1] = saved[: e - s + 1, i]
    return out


def _evaluate(strategy: str, vec: np.ndarray, problem: TrainingProblem, need_grad: bool):
    lay = TrainableLayout(strategy, problem)
    obs = problem.obs
    H, wvec = obs.H, obs.weights
    scale = 1.0 / problem.n0 if obs.normalized else 1.0

    phi, nodes, gains, params, starts, spans, Z0, tape, saved = _forward_windows(
        lay, vec, problem
    )
    n_w = len(starts)
    last = problem.n_obs - 1

    inv_count = 1.0 / problem.n_obs
    data = 0.0
    saved_bar = np.zeros_like(saved) if need_grad else None
    for i, s in enumerate(starts):
        e = starts[i + 1] - 1 if i < n_w - 1 else last
        offs = np.arange(0, e - s + 1)
        resid = scale * (saved[offs, i] @ H.T - problem.y[s : e + 1])
        data += inv_count * float((wvec**2 * resid**2).sum())
        if need_grad:
            saved_bar[offs, i] += (2.0 * inv_count * scale) * (wvec**2 * resid) @ H

    continuity = 0.0
    gaps = []
    # boundary gaps live in the same units as the data residuals
    lam_ms = problem.shooting.lambda_ms * scale**2
    for i in range(n_w - 1):
        gap = saved[spans[i], i] - Z0[i + 1]
        gaps.append(gap)
        continuity += lam_ms * float(gap @ gap)
        if need_grad:
            saved_bar[spans[i], i] += 2.0 * lam_ms * gap

    gain_term, gain_reg_grad = 0.0, None
    if gains is not None:
        gain_term, gain_reg_grad = _gain_regularizer(gains, problem.observer, H)

    parts = LossParts(data + continuity + gain_term, data, continuity, gain_term)
    if not need_grad:
        return parts, None

    grads = tape.backward(saved_bar)
    gvec = np.zeros(lay.size)
    gvec[lay.phi_sl] = grads.phi
    gvec[lay.theta_sl] = grads.theta
    if n_w > 1:
        z_bar = grads.u0.copy()
        for i, gap in enumerate(gaps):
            z_bar[i + 1] += -2.0 * lam_ms * gap
        gnodes = np.empty((n_w - 1, 7))
        for i in range(1, n_w):
            w_bar, d_bar = reconstruct_z_vjp(
                nodes[i - 1, :6], nodes[i - 1, 6], params.N, z_bar[i]
            )
            gnodes[i - 1, :6] = w_bar
            gnodes[i - 1, 6] = d_bar
        gvec[lay.nodes_sl] = gnodes.ravel()
    if gains is not None:
        gvec[lay.gains_sl] = grads.gains + gain_reg_grad
    return parts, gvec


# ----------------------------------------------------------------------
# public entry points


def loss_parts(strategy: str, vec: np.ndarray, problem: TrainingProblem) -> LossParts:
    parts, _ = _evaluate(strategy, vec, problem, need_grad=False)
    return parts


def loss_gradient(strategy: str, vec: np.ndarray, problem: TrainingProblem):
    """(loss breakdown, flat gradient) for the given strategy's trainables."""
    return _evaluate(strategy, vec, problem, need_grad=True)


def loss_ude(vec: np.ndarray, problem: TrainingProblem) -> float:
    """Whole-horizon variance-weighted mean squared residual."""
    return loss_parts("ude", vec, problem).total


def loss_ms(vec: np.ndarray, problem: TrainingProblem) -> float:
    """Windowed data term plus soft continuity penalty."""
    return loss_parts("ms", vec, problem).total


def loss_pem(vec: np.ndarray, problem: TrainingProblem) -> float:
    """Observer-corrected data term plus gain regularization."""
    return loss_parts("pem", vec, problem).total


def loss_ms_pem(vec: np.ndarray, problem: TrainingProblem) -> float:
    """Observer inside shooting windows; continuity and gain terms add."""
    return loss_parts("mspem", vec, problem).total
