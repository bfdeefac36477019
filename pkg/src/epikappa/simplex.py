"""Euclidean projection onto the scaled simplex {u >= 0, sum(u) = N}.

Sort-based algorithm (Held-style pivot search as reviewed by Condat):
sort descending, locate the largest support size k whose water level
tau_k = (sum of top-k - N)/k stays below the k-th value, then clamp.
O(n log n); exact for any finite input, including negative entries.
"""

from __future__ import annotations

import numpy as np


def project_feasible_batch(V: np.ndarray, N: float) -> np.ndarray:
    """Project each row of a (B, n) array onto {u >= 0, sum(u) = N}."""
    V = np.asarray(V, dtype=float)
    if not np.all(np.isfinite(V)):
        raise ValueError("cannot project non-finite values")
    if N <= 0:
        raise ValueError(f"N must be > 0, got {N}")
    n = V.shape[1]
    u = -np.sort(-V, axis=1)
    levels = (np.cumsum(u, axis=1) - N) / np.arange(1, n + 1)
    ok = u - levels > 0
    k = (n - 1) - np.argmax(ok[:, ::-1], axis=1)  # last index where ok holds
    tau = levels[np.arange(V.shape[0]), k]
    return np.maximum(V - tau[:, None], 0.0)


def project_feasible(v: np.ndarray, N: float) -> np.ndarray:
    """Project a single vector onto {u >= 0, sum(u) = N}."""
    return project_feasible_batch(np.asarray(v, dtype=float)[None, :], N)[0]


def is_feasible(V: np.ndarray, N: float, mass_rtol: float = 1e-9, neg_rtol: float = 1e-12) -> bool:
    """True when every row already satisfies the constraints to tolerance.

    Used by solvers to skip the projection (and treat it as the identity in
    reverse mode) on states that are feasible up to accumulated rounding.
    """
    V = np.asarray(V)
    if np.min(V) < -neg_rtol * N:
        return False
    return bool(np.max(np.abs(V.sum(axis=-1) - N)) <= mass_rtol * N)


def projection_vjp(gbar: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Reverse-mode sensitivity of the projection.

    ``active`` marks the support of the projected point (u > 0). On the
    support the Jacobian is I - (1/|A|) 1 1^T; clamped coordinates carry no
    sensitivity. Rows are handled independently.
    """
    g = np.where(active, gbar, 0.0)
    counts = active.sum(axis=-1, keepdims=True)
    shift = g.sum(axis=-1, keepdims=True) / counts
    return np.where(active, g - shift, 0.0)
