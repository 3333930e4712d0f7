"""Lorenz-96 vector field with the diffusion unfolding.

States are plain float64 arrays of length ``n``. Index ``j`` in the code is
0-based; the cyclic neighbours ``j-2, j-1, j+1`` are taken modulo ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NoTrappingError

__all__ = [
    "SystemConfig",
    "vector_field",
    "jacobian",
    "equilibrium",
    "energy",
    "trapping_radius",
    "symmetric_part_eigenvalues",
]


@dataclass(frozen=True)
class SystemConfig:
    """Point in model-family space: dimension ``n``, forcing ``F``, diffusion ``G``."""

    n: int
    F: float
    G: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidArgumentError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "F", float(self.F))
        object.__setattr__(self, "G", float(self.G))

    def with_params(self, F: float | None = None, G: float | None = None) -> "SystemConfig":
        return SystemConfig(self.n, self.F if F is None else F, self.G if G is None else G)


def _as_state(cfg: SystemConfig, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != cfg.n:
        raise InvalidArgumentError(f"state has shape {x.shape}, expected ({cfg.n},)")
    return x


def vector_field(cfg: SystemConfig, x) -> np.ndarray:
    """Right-hand side ``x_{j-1}(x_{j+1}-x_{j-2}) - x_j + G(x_{j-1}-2x_j+x_{j+1}) + F``."""
    x = _as_state(cfg, x)
    xm1 = np.roll(x, 1)
    xm2 = np.roll(x, 2)
    xp1 = np.roll(x, -1)
    out = xm1 * (xp1 - xm2) - x + cfg.F
    if cfg.G != 0.0:
        out = out + cfg.G * (xm1 - 2.0 * x + xp1)
    return out


def jacobian(cfg: SystemConfig, x) -> np.ndarray:
    """Dense Jacobian of :func:`vector_field` at ``x``."""
    x = _as_state(cfg, x)
    n = cfg.n
    J = np.zeros((n, n))
    G = cfg.G
    for j in range(n):
        jm2, jm1, jp1 = (j - 2) % n, (j - 1) % n, (j + 1) % n
        # accumulate: for small n the neighbours can coincide
        J[j, jm1] += x[jp1] - x[jm2] + G
        J[j, jp1] += x[jm1] + G
        J[j, jm2] -= x[jm1]
        J[j, j] += -1.0 - 2.0 * G
    return J


def equilibrium(cfg: SystemConfig) -> np.ndarray:
    """The trivial equilibrium ``(F, ..., F)``."""
    return np.full(cfg.n, cfg.F)


def energy(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * float(np.dot(x, x))


def symmetric_part_eigenvalues(n: int, G: float) -> np.ndarray:
    """Eigenvalues ``-1 - 2G(1 - cos(2 pi j / n))`` of the linear (dissipative) part."""
    j = np.arange(n)
    return -1.0 - 2.0 * G * (1.0 - np.cos(2.0 * np.pi * j / n))


def trapping_radius(cfg: SystemConfig) -> float:
    """Radius beyond which the energy strictly decreases.

    Every ball of radius larger than ``sqrt(n)|F| / (-lambda_max)`` is forward
    invariant, where ``lambda_max`` is the largest eigenvalue of the linear part.
    Only guaranteed for ``G > -1/4``.
    """
    if not cfg.G > -0.25:
        raise NoTrappingError(f"no trapping region guaranteed for G = {cfg.G} <= -1/4")
    lam_max = float(np.max(symmetric_part_eigenvalues(cfg.n, cfg.G)))
    return -np.sqrt(cfg.n) * abs(cfg.F) / lam_max
