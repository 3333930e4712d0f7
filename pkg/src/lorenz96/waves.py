"""Travelling-wave diagnostics: wave number, period, drift, linear predictor, Hovmöller tables."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import NotPeriodicError, PreOnsetError, UndefinedWaveError
from .integrator import Trajectory
from .spectral import f_g, first_lyapunov_coeff, hopf_value, omega0

__all__ = [
    "Drift",
    "WaveDiagnostics",
    "HovmollerTable",
    "wave_number",
    "wave_number_or_none",
    "measure_period",
    "linearized_wave",
    "linear_period",
    "drift_direction",
    "hovmoller",
    "diagnose",
    "write_hovmoller_csv",
]

_FLAT_TOL = 1e-12


class Drift(str, enum.Enum):
    DECREASING_J = "DecreasingJ"
    INCREASING_J = "IncreasingJ"
    NONE = "None"


def _spatial_spectrum(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise UndefinedWaveError("wave number needs a snapshot with at least two entries")
    c = np.abs(np.fft.rfft(x - x.mean()))
    return c[1 : x.size // 2 + 1]


def wave_number(x) -> int:
    """Dominant spatial Fourier mode ``1 <= m <= n/2`` of a snapshot (mean removed).

    Ties go to the smaller ``m``. A spatially constant snapshot raises
    :class:`UndefinedWaveError`.
    """
    mags = _spatial_spectrum(x)
    scale = max(1.0, float(np.max(np.abs(x))))
    if mags.size == 0 or float(mags.max()) <= _FLAT_TOL * scale * len(x):
        raise UndefinedWaveError("snapshot is spatially constant")
    top = float(mags.max())
    return int(np.nonzero(mags >= top * (1 - 1e-12))[0][0]) + 1


def wave_number_or_none(x) -> Optional[int]:
    try:
        return wave_number(x)
    except UndefinedWaveError:
        return None


def dominant_wave_number(traj: Trajectory) -> Optional[int]:
    """Wave number of the time-averaged spatial power spectrum (robust to snapshot phase)."""
    X = traj.states - traj.states.mean(axis=1, keepdims=True)
    power = (np.abs(np.fft.rfft(X, axis=1)) ** 2).mean(axis=0)[1 : traj.n // 2 + 1]
    if power.size == 0 or float(power.max()) <= (_FLAT_TOL * traj.n) ** 2:
        return None
    return int(np.argmax(power)) + 1


def _upward_crossings(t, y, dydt=None) -> np.ndarray:
    idx = np.nonzero((y[:-1] < 0.0) & (y[1:] >= 0.0))[0]
    out = np.empty(idx.size)
    for m, i in enumerate(idx):
        y0, y1 = y[i], y[i + 1]
        h = t[i + 1] - t[i]
        s = y0 / (y0 - y1)
        if dydt is not None:
            # a few Newton steps on the Hermite cubic
            d0, d1 = dydt[i] * h, dydt[i + 1] * h
            for _ in range(4):
                s2, s3 = s * s, s * s * s
                val = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * d1
                der = (6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * d0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * d1
                if der == 0:
                    break
                s = min(max(s - val / der, 0.0), 1.0)
        out[m] = t[i] + s * h
    return out


def _autocorr_peak(y: np.ndarray, spacing: float, lag_guess: float) -> float:
    """Autocorrelation maximum near ``lag_guess``, refined by a parabola through three lags."""
    y = y - y.mean()
    k0 = int(round(lag_guess / spacing))
    if k0 < 2 or k0 + 2 >= y.size:
        return lag_guess
    lo, hi = max(1, int(0.8 * k0)), min(y.size - 2, int(1.2 * k0) + 1)
    lags = np.arange(lo, hi + 1)
    ac = np.array([np.dot(y[:-k], y[k:]) / (y.size - k) for k in lags])
    i = int(np.argmax(ac))
    if i == 0 or i == lags.size - 1:
        return lag_guess
    a, b, c = ac[i - 1], ac[i], ac[i + 1]
    den = a - 2 * b + c
    off = 0.5 * (a - c) / den if den != 0 else 0.0
    return float((lags[i] + off) * spacing)


def measure_period(traj: Trajectory, component: int = 0, jitter: float = 0.01, max_group: int = 8) -> float:
    """Period of a (near-)periodic sampled signal ``x_k(t)``.

    Upward crossings of ``x_k`` through its time mean are located with Hermite
    interpolation. If single spacings scatter by more than ``jitter``, groups
    of ``m`` consecutive crossings are tried (orbits crossing the mean several
    times per period). The period is the least-squares slope of the period-start
    times against their index; the autocorrelation peak at that lag is only
    used as a consistency check.
    """
    y = traj.states[:, component]
    c = float(y.mean())
    d = None if traj.derivs is None else traj.derivs[:, component]
    cr = _upward_crossings(traj.times, y - c, d)
    if cr.size < 3:
        raise NotPeriodicError("fewer than three mean crossings")
    for m in range(1, max_group + 1):
        starts = cr[::m]
        if starts.size < 3:
            break
        # all phases of the group must agree, not just the first
        sp = cr[m:] - cr[:-m]
        mean = float(sp.mean())
        if float(np.max(np.abs(sp - mean))) <= jitter * mean:
            k = np.arange(starts.size)
            T = float(np.polyfit(k, starts, 1)[0])
            ac = _autocorr_peak(y, traj.spacing, T)
            if abs(ac - T) > 0.05 * T:
                raise NotPeriodicError("autocorrelation does not confirm the crossing period")
            return T
    raise NotPeriodicError(f"no stable crossing spacing within {jitter:.0%} jitter")


def linear_period(l: int, n: int) -> float:
    """Period ``2 pi tan(pi l / n)`` of the wave born at the Hopf point of pair ``l``."""
    return 2.0 * math.pi / omega0(l, n)


def linearized_wave(l: int, n: int, F: float, t: float, scale: str = "linear") -> np.ndarray:
    """Offset from ``x_F`` of the linear travelling-wave predictor at time ``t``.

    Component ``j`` (0-based) is ``A cos(omega0 t + 2 pi j l / n)``, which
    drifts towards decreasing ``j``. With ``scale="linear"`` the amplitude is
    ``sqrt((F - F_H)/n)``; with ``scale="normal_form"`` it is the Hopf
    normal-form amplitude ``2 sqrt(f (F - F_H) / (-ell1 n))`` (supercritical only).
    """
    F_H = hopf_value(l, n)
    if F < F_H:
        raise PreOnsetError(f"F = {F} is below the Hopf value {F_H} of pair {l}")
    if scale == "linear":
        A = math.sqrt((F - F_H) / n)
    elif scale == "normal_form":
        ell1 = first_lyapunov_coeff(l, n)
        if ell1 >= 0:
            raise PreOnsetError("normal-form amplitude needs a supercritical Hopf point")
        f, _ = f_g(l, n)
        A = 2.0 * math.sqrt(f * (F - F_H) / (-ell1 * n))
    else:
        raise ValueError(f"unknown scale {scale!r}")
    j = np.arange(n)
    return A * np.cos(omega0(l, n) * t + 2.0 * math.pi * j * l / n)


def drift_direction(traj: Trajectory, tol: float = 1e-9) -> Drift:
    """Direction of travel from the cross-correlation lag of ``x_j`` and ``x_{j+1}``.

    A positive lag (``x_{j+1}`` lagging ``x_j``) means travel towards
    increasing ``j``. The lag is taken over all neighbouring pairs at once,
    searching within half a dominant period.
    """
    X = traj.states - traj.states.mean(axis=0)
    if float(np.max(np.abs(X))) <= tol:
        return Drift.NONE
    m = X.shape[0]
    A = np.fft.rfft(X, n=2 * m, axis=0)
    B = np.roll(A, -1, axis=1)
    # cc[k] = sum_t x_j(t) x_{j+1}(t + k)
    cc = np.fft.irfft(np.conj(A) * B, n=2 * m, axis=0).sum(axis=1)
    spec = (np.abs(A) ** 2).sum(axis=1)
    spec[0] = 0.0
    kdom = int(np.argmax(spec))
    if kdom == 0:
        return Drift.NONE
    half = max(1, int(0.5 * 2 * m / kdom))
    lags = np.concatenate([np.arange(-half, 0), np.arange(0, half + 1)])
    vals = cc[lags % (2 * m)]
    best = int(lags[int(np.argmax(vals))])
    if best > 0:
        return Drift.INCREASING_J
    if best < 0:
        return Drift.DECREASING_J
    return Drift.NONE


@dataclass
class HovmollerTable:
    """Long-format space-time table; ``j`` is 1-based and may be fractional when interpolated."""

    t: np.ndarray
    j: np.ndarray
    x: np.ndarray
    drift: Drift
    interp: int = 1

    def __len__(self):
        return len(self.t)


def hovmoller(traj: Trajectory, interp: int = 1) -> HovmollerTable:
    """Rows ``(t, j, x_j(t))`` ordered by time then sector.

    With ``interp > 1`` each gap ``[j, j+1]`` (cyclic, so ``n -> 1`` closes the
    ring) gets ``interp - 1`` linearly interpolated points.
    """
    if int(interp) != interp or interp < 1:
        raise ValueError(f"interp must be a positive integer, got {interp}")
    S = traj.states
    n = traj.n
    if interp == 1:
        vals = S
        jpos = np.arange(1, n + 1, dtype=np.float64)
    else:
        s = np.arange(interp) / interp
        nxt = np.roll(S, -1, axis=1)
        vals = (S[:, :, None] * (1 - s) + nxt[:, :, None] * s).reshape(S.shape[0], n * interp)
        jpos = (np.arange(n)[:, None] + 1 + s).ravel()
    m, w = vals.shape
    return HovmollerTable(
        t=np.repeat(traj.times, w), j=np.tile(jpos, m), x=vals.ravel(), drift=drift_direction(traj), interp=interp)


def write_hovmoller_csv(table: HovmollerTable, path) -> None:
    data = np.column_stack([table.t, table.j, table.x])
    fmt = ["%.17g", "%d" if table.interp == 1 else "%.17g", "%.17g"]
    np.savetxt(path, data, delimiter=",", header="t,j,x", comments="", fmt=fmt)


@dataclass
class WaveDiagnostics:
    l: Optional[int]
    T: Optional[float]
    amplitude: float
    drift: Drift

    def to_json(self) -> dict:
        d = asdict(self)
        d["drift"] = self.drift.value
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def diagnose(traj: Trajectory) -> WaveDiagnostics:
    """Wave number, period (None if aperiodic), amplitude and drift of a trajectory.

    The amplitude is half the peak-to-peak range, averaged over sectors.
    """
    amp = float(np.mean(0.5 * np.ptp(traj.states, axis=0)))
    try:
        T = measure_period(traj)
    except NotPeriodicError:
        T = None
    return WaveDiagnostics(l=dominant_wave_number(traj), T=T, amplitude=amp, drift=drift_direction(traj))
