"""Mixed-flow rotation algebra and shared flow parameters.

J is the counterclockwise pi/2 rotation J(x1, x2) = (-x2, x1), so that
nabla^perp f = J nabla f and curl G = d1 G2 - d2 G1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REGIMES = ("GL1", "GL2", "GL3", "GL1'", "GL2'", "GP")


def j_apply(G):
    """JG = G^perp = (-G2, G1); acts on the last axis."""
    G = np.asarray(G, dtype=np.float64)
    return np.stack([-G[..., 1], G[..., 0]], axis=-1)


def mixedflow_apply(alpha: float, beta: float, G):
    """(alpha I - beta J) G, the inverse of (alpha I + beta J) for a^2+b^2=1."""
    G = np.asarray(G, dtype=np.float64)
    return alpha * G - beta * j_apply(G)


def mixedflow_inverse_apply(alpha: float, beta: float, G):
    """(alpha I + beta J) G."""
    G = np.asarray(G, dtype=np.float64)
    return alpha * G + beta * j_apply(G)


def kappa_for_regime(regime: str, lam: float) -> float:
    table = {"GL1": 1.0, "GL2": lam, "GL1'": 0.0, "GL2'": 0.0}
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    return table.get(regime, 0.0)


@dataclass
class Params:
    """Flow coefficients and regime bookkeeping shared across modules.

    applied_force may be a constant 2-vector or a callable x -> 2-vector
    (vectorized over trailing-axis point arrays). interaction_scale rescales
    the vortex-interaction term of the mean-field equations; the harness sets
    it to pi so that the PDE matches the log-kernel particle convention.
    """

    alpha: float = 1.0
    beta: float = 0.0
    lam: float = 1.0
    temperature: float = 0.0
    applied_force: object = (0.0, 0.0)
    regime: str = "GL1"
    kappa: float | None = None
    interaction_scale: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if abs(self.alpha**2 + self.beta**2 - 1.0) > 1e-12:
            raise ValueError("alpha^2 + beta^2 must equal 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.kappa is None:
            self.kappa = kappa_for_regime(self.regime, self.lam)

    def force_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if callable(self.applied_force):
            return np.asarray(self.applied_force(x), dtype=np.float64)
        return np.broadcast_to(np.asarray(self.applied_force, dtype=np.float64),
                               x.shape).copy()
