"""Contact-rate models: hard step, logistic smooth step, and neural map.

The hard step is the scenario ground truth; the smooth step is a training
aid for differentiating through a jointly-fitted step; the neural variant
is the learned surrogate, bounded in (0, kappa_max) by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .params import N_STATES


def smooth_step_kappa(kappa1: float, kappa2: float, t_ld: float, width: float, t):
    """Logistic blend kappa1 + (kappa2 - kappa1) * sigmoid((t - t_ld)/width).

    Converges pointwise to the hard step as width -> 0 away from t_ld.
    """
    if width <= 0:
        raise ValueError(f"width must be > 0, got {width}")
    return kappa1 + (kappa2 - kappa1) * mlp.sigmoid((np.asarray(t, dtype=float) - t_ld) / width)


@dataclass(frozen=True)
class StepContact:
    """kappa(t) = kappa1 for t < t_ld, kappa2 for t >= t_ld."""

    kappa1: float
    kappa2: float
    t_ld: float

    def __post_init__(self):
        for name in ("kappa1", "kappa2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def kappa(self, t, u=None):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.t_ld, self.kappa1, self.kappa2)


@dataclass(frozen=True)
class SmoothStepContact:
    """Logistic-blend stand-in for :class:`StepContact` during joint fits."""

    kappa1: float
    kappa2: float
    t_ld: float
    width: float = 0.5

    def kappa(self, t, u=None):
        return smooth_step_kappa(self.kappa1, self.kappa2, self.t_ld, self.width, t)

    def hard(self) -> StepContact:
        return StepContact(self.kappa1, self.kappa2, self.t_ld)


@dataclass(frozen=True)
class NeuralContact:
    """kappa = kappa_max * sigmoid(net(u_tilde)) on the normalized non-S states.

    ``n0`` is the input normalization constant (living population at t=0),
    frozen when the training problem is built. Time is not an input; the
    network sees state only.
    """

    phi: np.ndarray
    n0: float
    kappa_max: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        if self.phi.shape != (mlp.N_PARAMS,):
            raise ValueError(f"phi must have shape ({mlp.N_PARAMS},), got {self.phi.shape}")
        if not 0.0 < self.kappa_max <= 1.0:
            raise ValueError(f"kappa_max must lie in (0, 1], got {self.kappa_max}")
        if self.n0 <= 0:
            raise ValueError(f"n0 must be > 0, got {self.n0}")

    def features(self, u):
        """Normalized 6-vector input: (E, Ins, Is, Ia, R, D) / n0. S is omitted."""
        u = np.asarray(u, dtype=float)
        return u[..., 1:N_STATES] / self.n0

    def kappa(self, t, u):
        if u is None:
            raise ValueError("neural contact model needs the state u")
        return mlp.contact_value(self.phi, self.features(u), self.kappa_max)


ContactModel = StepContact | SmoothStepContact | NeuralContact


def contact_rate(contact: ContactModel, u, t):
    """Evaluate kappa(t) (step variants) or kappa(u) (neural variant)."""
    return contact.kappa(t, u)
