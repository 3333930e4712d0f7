"""Closed-form spectral and bifurcation theory of the trivial equilibrium.

The Jacobian at ``x_F`` is circulant, so every quantity here is an explicit
trigonometric expression in the eigen-index ``j`` (or wave index ``l``) and
the dimension ``n``. Nothing in this module integrates or solves numerically
except :func:`critical_ratio`, which bisects a scalar trigonometric
polynomial.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import (
    DegenerateError,
    ExcludedParameterError,
    InvalidArgumentError,
    NoCrossingError,
    UnsupportedDimensionError,
)
from .model import SystemConfig

__all__ = [
    "Criticality",
    "EigenMode",
    "HopfPoint",
    "HopfHopfPoint",
    "NormalFormCoefficients",
    "REFERENCE_N12_COEFFICIENTS",
    "HOPF_HOPF_TOL",
    "f_g",
    "eigenvalue",
    "eigenvalues",
    "eigenvector",
    "eigenmode",
    "is_valid_wave_index",
    "hopf_value",
    "hopf_value_extended",
    "hopf_value_bounds",
    "omega0",
    "first_lyapunov_coeff",
    "lyapunov_numerator",
    "critical_ratio",
    "criticality",
    "hopf_hopf_check",
    "enumerate_bifurcations",
    "expected_slot_count",
    "first_bifurcation_index",
    "asymptotic_limits",
    "hopf_line",
    "ns_tangent_slopes",
    "ns_tangent_line",
]

HOPF_HOPF_TOL = 1e-12
_TIE_TOL = 1e-12


class Criticality(str, enum.Enum):
    SUBCRITICAL = "subcritical"
    SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class EigenMode:
    j: int
    lam: complex
    rho: complex


@dataclass(frozen=True)
class HopfPoint:
    l: int
    n: int
    F_H: float
    omega0: float
    ell1: float
    criticality: Criticality


@dataclass(frozen=True)
class HopfHopfPoint:
    l1: int
    l2: int
    n: int
    F_HH: float

    @property
    def F_H(self) -> float:
        return self.F_HH


Bifurcation = Union[HopfPoint, HopfHopfPoint]


@dataclass(frozen=True)
class NormalFormCoefficients:
    """Hopf-Hopf normal-form coefficients ``(sigma, theta, delta, Theta, Delta)``.

    These are inputs; the package never computes them.
    """

    sigma: int
    theta: float
    delta: float
    Theta_c: float = 0.0
    Delta_c: float = 0.0

    def __post_init__(self):
        if self.sigma not in (-1, 1):
            raise InvalidArgumentError(f"sigma must be +1 or -1, got {self.sigma!r}")


# Reference values at the n = 12 Hopf-Hopf point, taken as given.
REFERENCE_N12_COEFFICIENTS = NormalFormCoefficients(1, 1.414, 1.258, -0.200, 0.678)


_SQRT3_2 = math.sqrt(3.0) / 2.0
# cos and sin of k/d turns for the denominators whose cosines are rational
_EXACT_TURNS = {
    Fraction(0): (1.0, 0.0), Fraction(1, 2): (-1.0, 0.0),
    Fraction(1, 4): (0.0, 1.0), Fraction(3, 4): (0.0, -1.0),
    Fraction(1, 6): (0.5, _SQRT3_2), Fraction(1, 3): (-0.5, _SQRT3_2),
    Fraction(2, 3): (-0.5, -_SQRT3_2), Fraction(5, 6): (0.5, -_SQRT3_2),
}


def _cos_sin_turn(k: int, d: int) -> tuple[float, float]:
    """``(cos, sin)`` of ``2 pi k / d``, exact where the cosine is rational."""
    q = Fraction(k, d) % 1
    if q in _EXACT_TURNS:
        return _EXACT_TURNS[q]
    y = 2.0 * math.pi * q.numerator / q.denominator
    return math.cos(y), math.sin(y)


def f_g(l: int, n: int) -> tuple[float, float]:
    """Real and imaginary parts of the eigenvalue per unit forcing."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    c1, s1 = _cos_sin_turn(l, n)
    c2, s2 = _cos_sin_turn(2 * l, n)
    return c1 - c2, -s1 - s2


def _check_index(j: int, n: int) -> None:
    if not 0 <= j < n:
        raise InvalidArgumentError(f"index j = {j} outside 0..{n - 1}")


def eigenvalue(j: int, cfg: SystemConfig) -> complex:
    """Eigenvalue ``kappa_j`` of the Jacobian at ``x_F`` (reduces to ``lambda_j`` at G = 0)."""
    _check_index(j, cfg.n)
    f, g = f_g(j, cfg.n)
    re = -1.0 - 2.0 * cfg.G * (1.0 - _cos_sin_turn(j, cfg.n)[0]) + cfg.F * f
    return complex(re, cfg.F * g)


def eigenvalues(cfg: SystemConfig) -> np.ndarray:
    """All ``n`` eigenvalues, ordered by index."""
    y = 2.0 * np.pi * np.arange(cfg.n) / cfg.n
    f = np.cos(y) - np.cos(2 * y)
    g = -np.sin(y) - np.sin(2 * y)
    return (-1.0 - 2.0 * cfg.G * (1.0 - np.cos(y)) + cfg.F * f) + 1j * cfg.F * g


def eigenvector(j: int, n: int) -> np.ndarray:
    """Unit Fourier eigenvector ``(1, rho, ..., rho^{n-1}) / sqrt(n)``, ``rho = exp(-2 pi i j / n)``."""
    _check_index(j, n)
    k = np.arange(n)
    return np.exp(-2j * np.pi * j * k / n) / math.sqrt(n)


def eigenmode(j: int, cfg: SystemConfig) -> EigenMode:
    return EigenMode(j, eigenvalue(j, cfg), complex(np.exp(-2j * np.pi * j / cfg.n)))


def is_valid_wave_index(l: int, n: int) -> bool:
    """True when the ``l``-th eigenpair is complex and crosses the axis (0 < l < n/2, l != n/3)."""
    return 0 < l and 2 * l < n and 3 * l != n


def _require_crossing(l: int, n: int) -> None:
    if not is_valid_wave_index(l, n):
        raise NoCrossingError(f"eigenpair l = {l} does not cross the imaginary axis for n = {n}")


def hopf_value(l: int, n: int) -> float:
    """Forcing ``1/f(l, n)`` at which the ``l``-th pair crosses (G = 0)."""
    _require_crossing(l, n)
    return 1.0 / f_g(l, n)[0]


def hopf_value_extended(l: int, n: int, G: float) -> float:
    """Hopf forcing on the diffusion-unfolded model, ``(1 + 2G(1 - cos(2 pi l/n))) / f(l, n)``."""
    _require_crossing(l, n)
    return (1.0 + 2.0 * G * (1.0 - _cos_sin_turn(l, n)[0])) / f_g(l, n)[0]


def hopf_value_bounds(n: int) -> tuple[float, float]:
    """``(F_min, F_max)``: extremes of the negative and positive Hopf values."""
    if n < 4:
        raise UnsupportedDimensionError(f"Hopf bounds need n >= 4, got {n}")
    F_max = 1.0 / f_g(2, 7)[0] if n == 7 else 1.0 / f_g(1, n)[0]
    if n in (4, 6):
        F_min = -0.5
    else:
        F_min = 1.0 / f_g(n // 3 + 1, n)[0]
    return F_min, F_max


def omega0(l: int, n: int) -> float:
    """Angular frequency ``cot(pi l / n)`` of the critical pair at the crossing."""
    _require_crossing(l, n)
    return 1.0 / math.tan(math.pi * l / n)


def lyapunov_numerator(y: float) -> float:
    """``5 cos y + 8 cos 2y - 2 cos 3y - 8``; carries the sign of the first Lyapunov coefficient."""
    return 5.0 * math.cos(y) + 8.0 * math.cos(2 * y) - 2.0 * math.cos(3 * y) - 8.0


def first_lyapunov_coeff(l: int, n: int) -> float:
    """Closed-form first Lyapunov coefficient of the Hopf point of pair ``l`` (G = 0)."""
    _require_crossing(l, n)
    a = math.pi * l / n
    y = 2.0 * a
    denom = 4.0 * math.cos(y) - 4.0 * math.cos(2 * y) + 9.0
    return 4.0 / n * math.tan(a) * math.sin(3 * a) ** 2 * lyapunov_numerator(y) / denom


@lru_cache(maxsize=None)
def _numerator_root(tol: float = 1e-12) -> float:
    lo, hi = 0.4, 0.7
    if not lyapunov_numerator(lo) > 0.0 > lyapunov_numerator(hi):
        raise RuntimeError("root bracket for the Lyapunov numerator is invalid")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lyapunov_numerator(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_ratio() -> float:
    """``y0 / (2 pi)``: wave ratio ``l/n`` where the Hopf criticality switches."""
    return _numerator_root() / (2.0 * math.pi)


def criticality(l: int, n: int) -> Criticality:
    ell1 = first_lyapunov_coeff(l, n)
    if ell1 > 0.0:
        return Criticality.SUBCRITICAL
    if ell1 < 0.0:
        return Criticality.SUPERCRITICAL
    raise DegenerateError(f"first Lyapunov coefficient vanishes at (l, n) = ({l}, {n})")


def hopf_hopf_check(l1: int, l2: int, n: int, tol: float = HOPF_HOPF_TOL) -> bool:
    """True iff ``cos(2 pi l1/n) + cos(2 pi l2/n) = 1/2`` for two distinct valid pairs."""
    if l1 == l2 or not (is_valid_wave_index(l1, n) and is_valid_wave_index(l2, n)):
        return False
    s = math.cos(2.0 * math.pi * l1 / n) + math.cos(2.0 * math.pi * l2 / n)
    return abs(s - 0.5) <= tol


def _sort_key(rec: Bifurcation):
    F = rec.F_H
    return (0 if F > 0 else 1, F if F > 0 else -F)


def enumerate_bifurcations(n: int) -> list[Bifurcation]:
    """All Hopf and Hopf-Hopf points of ``x_F`` along the F axis (G = 0).

    Positive values come first in ascending order, then negative values by
    increasing magnitude.
    """
    if n < 4:
        raise UnsupportedDimensionError(f"Hopf enumeration needs n >= 4, got {n}")
    ls = [l for l in range(1, (n + 1) // 2) if is_valid_wave_index(l, n)]
    paired: dict[int, int] = {}
    for i, a in enumerate(ls):
        for b in ls[i + 1:]:
            if hopf_hopf_check(a, b, n):
                paired[a] = b
                paired[b] = a
    records: list[Bifurcation] = []
    for l in ls:
        if l in paired:
            if l < paired[l]:
                F_HH = hopf_value(l, n)
                records.append(HopfHopfPoint(l, paired[l], n, F_HH))
            continue
        records.append(
            HopfPoint(l, n, hopf_value(l, n), omega0(l, n), first_lyapunov_coeff(l, n), criticality(l, n))
        )
    records.sort(key=_sort_key)
    return records


def expected_slot_count(n: int) -> int:
    """Number of crossing eigenpairs, ``ceil(n/2 - 1)`` minus one when ``3 | n``."""
    return math.ceil(n / 2 - 1) - (1 if n % 3 == 0 else 0)


def first_bifurcation_index(n: int) -> Union[int, tuple[int, int]]:
    """Index maximising ``f(l, n)`` over ``0 < l < n/3``; a pair on a Hopf-Hopf tie."""
    if n < 4:
        raise UnsupportedDimensionError(f"first bifurcation needs n >= 4, got {n}")
    cands = [l for l in range(1, n) if 3 * l < n]
    vals = [f_g(l, n)[0] for l in cands]
    best = max(vals)
    top = [l for l, v in zip(cands, vals) if best - v <= _TIE_TOL]
    if len(top) == 1:
        return top[0]
    return (top[0], top[1])


def asymptotic_limits() -> tuple[float, float]:
    """Large-n limits of the onset wave period and of ``n / l1(n)``."""
    y = math.acos(0.25)
    return 2.0 * math.pi * math.tan(y / 2.0), 2.0 * math.pi / y


def hopf_line(l: int, n: int, F: float) -> float:
    """G-value of the Hopf line of pair ``l`` at forcing ``F``."""
    _require_crossing(l, n)
    if F == 0.0:
        raise ExcludedParameterError("Hopf lines exclude F = 0 (the eigenvalue itself vanishes)")
    c = math.cos(2.0 * math.pi * l / n)
    return (F * f_g(l, n)[0] - 1.0) / (2.0 * (1.0 - c))


def ns_tangent_slopes(coeffs: NormalFormCoefficients) -> tuple[float, float]:
    """Slopes of the two Neimark-Sacker tangent lines at the n = 12 Hopf-Hopf point."""
    if coeffs.delta == 2.0 or coeffs.theta == 0.5:
        raise DegenerateError("tangent lines undefined for delta = 2 or theta = 1/2")
    d, t = coeffs.delta, coeffs.theta
    return (1.0 - d) / (2.0 - d), (1.0 - t) / (1.0 - 2.0 * t)


def ns_tangent_line(coeffs: NormalFormCoefficients, F: float, F_HH: float = 1.0) -> tuple[float, float]:
    s2, s3 = ns_tangent_slopes(coeffs)
    return s2 * (F - F_HH), s3 * (F - F_HH)
