"""Small feed-forward contact-rate network on a flat parameter vector.

Architecture: 6 inputs (normalized non-susceptible states), three hidden
layers of 10 units with Swish activations, scalar head squashed by a
logistic sigmoid and scaled by ``kappa_max``. All parameters live in one
flat float64 vector so optimizers and the gradient tape can treat the
network as a plain coordinate block.
"""

from __future__ import annotations

import numpy as np

IN_DIM = 6
HIDDEN = 10
N_LAYERS = 3

# (rows, cols) per weight matrix, stored row-major as x @ W + b
_SHAPES = [(IN_DIM, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, 1)]

N_PARAMS = sum(r * c + c for r, c in _SHAPES)  # 301


def layer_offsets() -> list[tuple[int, int, tuple[int, int]]]:
    """(weight_offset, bias_offset, weight_shape) per layer, into the flat vector."""
    out, off = [], 0
    for r, c in _SHAPES:
        out.append((off, off + r * c, (r, c)))
        off += r * c + c
    return out


_OFFSETS = layer_offsets()


def init_params(rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    """Uniform [-scale, scale] initialization of the flat parameter vector."""
    return rng.uniform(-scale, scale, size=N_PARAMS)


def unflatten(phi: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views (W, b) per layer into the flat vector; no copies."""
    phi = np.asarray(phi)
    if phi.shape != (N_PARAMS,):
        raise ValueError(f"expected {N_PARAMS} parameters, got shape {phi.shape}")
    out = []
    for (w0, b0, shape) in _OFFSETS:
        out.append((phi[w0:b0].reshape(shape), phi[b0:b0 + shape[1]]))
    return out


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def forward_cached(weights, x: np.ndarray):
    """Forward pass on a (B, 6) batch.

    Returns the pre-squash scalar head ``z`` of shape (B,) and the cache of
    layer inputs / pre-activation sigmoids needed by :func:`vjp`.
    """
    h = x
    cache = []
    for (W, b) in weights[:-1]:
        z = h @ W + b
        s = sigmoid(z)
        cache.append((h, z, s))
        h = z * s  # Swish
    W, b = weights[-1]
    cache.append((h, None, None))
    z_out = (h @ W)[:, 0] + b[0]
    return z_out, cache


def vjp(weights, cache, zbar: np.ndarray, grad_flat: np.ndarray) -> np.ndarray:
    """Reverse pass for :func:`forward_cached`.

    ``zbar`` is d(loss)/d(z_out) of shape (B,). Accumulates parameter
    sensitivities in-place into ``grad_flat`` (length 301) and returns the
    input sensitivity of shape (B, 6).
    """
    gviews = unflatten(grad_flat)
    W_out, _ = weights[-1]
    h_last = cache[-1][0]
    gW, gb = gviews[-1]
    gW += h_last.T @ zbar[:, None]
    gb += zbar.sum()
    hbar = zbar[:, None] * W_out[:, 0][None, :]
    for li in range(N_LAYERS - 1, -1, -1):
        h_in, z, s = cache[li]
        zb = hbar * (s * (1.0 + z * (1.0 - s)))  # Swish derivative
        W, _ = weights[li]
        gW, gb = gviews[li]
        gW += h_in.T @ zb
        gb += zb.sum(axis=0)
        hbar = zb @ W.T
    return hbar


def contact_value(phi: np.ndarray, u_norm: np.ndarray, kappa_max: float = 1.0) -> np.ndarray:
    """kappa = kappa_max * sigmoid(net(u_norm)) on a (B, 6) or (6,) input."""
    x = np.atleast_2d(np.asarray(u_norm, dtype=float))
    z, _ = forward_cached(unflatten(phi), x)
    k = kappa_max * sigmoid(z)
    return k if np.asarray(u_norm).ndim > 1 else float(k[0])
