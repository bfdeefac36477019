"""Flat-vector minimizers used for training: ADAM then L-BFGS.

Both stages work on a callable ``fg(x) -> (loss, grad, aux)`` where
``aux`` is opaque bookkeeping (the loss breakdown) forwarded to the
step callback. Non-finite losses halt ADAM at the last finite iterate;
inside the L-BFGS line search they just reject the trial step, so
invalid parameter regions behave like walls rather than crashes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

FunGrad = Callable[[np.ndarray], tuple[float, np.ndarray, Any]]
StepCallback = Callable[[np.ndarray, float, float, Any], None]


@dataclass(frozen=True)
class OptimBudget:
    """Step counts, tolerances, and the seed for one fit."""

    adam_steps: int = 300
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    lbfgs_iters: int = 100
    lbfgs_memory: int = 10
    grad_tol: float = 1e-9
    ftol: float = 1e-12  # relative per-iteration improvement, L-BFGS stage
    seed: int = 0

    def __post_init__(self):
        if self.adam_steps < 0 or self.lbfgs_iters < 0:
            raise ValueError("step budgets must be >= 0")
        if self.lr <= 0 or self.eps <= 0 or self.clip_norm <= 0:
            raise ValueError("lr, eps, and clip_norm must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.lbfgs_memory < 1:
            raise ValueError("lbfgs_memory must be >= 1")
        if self.grad_tol < 0 or self.ftol < 0:
            raise ValueError("tolerances must be >= 0")


@dataclass
class OptimResult:
    x: np.ndarray  # best finite iterate seen
    loss: float
    n_steps: int
    status: str  # "converged" | "budget" | "non-finite" | "line-search"


def adam(
    fg: FunGrad,
    x0: np.ndarray,
    budget: OptimBudget,
    callback: StepCallback | None = None,
) -> OptimResult:
    """Bias-corrected ADAM with global-norm gradient clipping."""
    x = np.array(x0, dtype=float, copy=True)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    best_x, best_f = x.copy(), np.inf
    status, steps = "budget", 0
    for k in range(1, budget.adam_steps + 1):
        f, g, aux = fg(x)
        if not (np.isfinite(f) and np.isfinite(g).all()):
            status = "non-finite"
            break
        steps = k
        if f < best_f:
            best_f, best_x = f, x.copy()
        gnorm = float(np.linalg.norm(g))
        if callback is not None:
            callback(x, f, gnorm, aux)
        if gnorm <= budget.grad_tol:
            status = "converged"
            break
        if gnorm > budget.clip_norm:
            g = (budget.clip_norm / gnorm) * g
        m = budget.beta1 * m + (1.0 - budget.beta1) * g
        v = budget.beta2 * v + (1.0 - budget.beta2) * g * g
        mhat = m / (1.0 - budget.beta1**k)
        vhat = v / (1.0 - budget.beta2**k)
        x = x - budget.lr * mhat / (np.sqrt(vhat) + budget.eps)
    return OptimResult(best_x, best_f, steps, status)


def _wolfe(fg, x, f0, g0, d, c1=1e-4, c2=0.9, max_evals=25):
    """Strong-Wolfe line search along d; bracket then bisection zoom.

    Returns (alpha, f, g, aux) or None when no point with sufficient
    decrease was found. Non-finite trial losses shrink the bracket.
    """
    d_g0 = float(g0 @ d)
    if d_g0 >= 0:
        return None

    def trial(a):
        f, g, aux = fg(x + a * d)
        if not (np.isfinite(f) and np.isfinite(g).all()):
            return np.inf, None, None
        return f, g, aux

    def zoom(lo, f_lo, g_lo, aux_lo, hi, evals):
        while evals < max_evals:
            a = 0.5 * (lo + hi)
            evals += 1
            f_a, g_a, aux_a = trial(a)
            if f_a > f0 + c1 * a * d_g0 or f_a >= f_lo:
                hi = a
            else:
                der = float(g_a @ d)
                if abs(der) <= -c2 * d_g0:
                    return a, f_a, g_a, aux_a
                if der * (hi - lo) >= 0:
                    hi = lo
                lo, f_lo, g_lo, aux_lo = a, f_a, g_a, aux_a
            if abs(hi - lo) <= 1e-12 * max(1.0, abs(lo)):
                break
        # settle for sufficient decrease when curvature never tightened
        if g_lo is not None and f_lo < f0:
            return lo, f_lo, g_lo, aux_lo
        return None

    a_prev, f_prev, g_prev, aux_prev = 0.0, f0, g0, None
    a = 1.0
    evals = 0
    while evals < max_evals:
        evals += 1
        f_a, g_a, aux_a = trial(a)
        if f_a > f0 + c1 * a * d_g0 or (a_prev > 0 and f_a >= f_prev):
            return zoom(a_prev, f_prev, g_prev, aux_prev, a, evals)
        der = float(g_a @ d)
        if abs(der) <= -c2 * d_g0:
            return a, f_a, g_a, aux_a
        if der >= 0:
            return zoom(a, f_a, g_a, aux_a, a_prev, evals)
        a_prev, f_prev, g_prev, aux_prev = a, f_a, g_a, aux_a
        a *= 2.0
    if a_prev > 0 and f_prev < f0:
        return a_prev, f_prev, g_prev, aux_prev
    return None


def _two_loop(g, S, Y, rho):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(S), reversed(Y), reversed(rho)):
        a = r * float(s @ q)
        alphas.append(a)
        q -= a * y
    if Y:
        gamma = float(S[-1] @ Y[-1]) / float(Y[-1] @ Y[-1])
        q *= gamma
    for (s, y, r), a in zip(zip(S, Y, rho), reversed(alphas)):
        b = r * float(y @ q)
        q += (a - b) * s
    return q


def lbfgs(
    fg: FunGrad,
    x0: np.ndarray,
    budget: OptimBudget,
    callback: StepCallback | None = None,
) -> OptimResult:
    """Limited-memory BFGS (two-loop recursion) with a Wolfe line search."""
    x = np.array(x0, dtype=float, copy=True)
    f, g, aux = fg(x)
    if not (np.isfinite(f) and np.isfinite(g).all()):
        return OptimResult(x, np.inf, 0, "non-finite")
    best_x, best_f = x.copy(), f
    S: deque = deque(maxlen=budget.lbfgs_memory)
    Y: deque = deque(maxlen=budget.lbfgs_memory)
    rho: deque = deque(maxlen=budget.lbfgs_memory)
    status, steps = "budget", 0
    for k in range(1, budget.lbfgs_iters + 1):
        if float(np.linalg.norm(g)) <= budget.grad_tol:
            status = "converged"
            break
        d = -_two_loop(g, S, Y, rho)
        if float(d @ g) >= 0:
            S.clear()
            Y.clear()
            rho.clear()
            d = -g
        hit = _wolfe(fg, x, f, g, d)
        if hit is None and S:
            S.clear()
            Y.clear()
            rho.clear()
            d = -g
            hit = _wolfe(fg, x, f, g, d)
        if hit is None:
            status = "line-search"
            break
        alpha, f_new, g_new, aux_new = hit
        steps = k
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
        drop = f - f_new
        x = x + s
        f, g, aux = f_new, g_new, aux_new
        if f < best_f:
            best_f, best_x = f, x.copy()
        if callback is not None:
            callback(x, f, float(np.linalg.norm(g)), aux)
        if 0 <= drop <= budget.ftol * max(1.0, abs(f)):
            status = "converged"
            break
    return OptimResult(best_x, best_f, steps, status)


def minimize(
    fg: FunGrad,
    x0: np.ndarray,
    budget: OptimBudget,
    callback: StepCallback | None = None,
) -> OptimResult:
    """ADAM warm start followed by optional L-BFGS refinement."""
    first = adam(fg, x0, budget, callback)
    if first.status == "non-finite" or budget.lbfgs_iters == 0:
        return first
    second = lbfgs(fg, first.x, budget, callback)
    return OptimResult(
        second.x, second.loss, first.n_steps + second.n_steps, second.status
    )
