"""Lyapunov spectra, attractor classification and parameter scans."""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .errors import DivergenceError, InvalidArgumentError
from .integrator import DEFAULT_DT, _raise_status, advance, divergence_guard
from .model import SystemConfig, _as_state, equilibrium
from .waves import wave_number_or_none

__all__ = [
    "LyapunovOptions",
    "LyapunovSpectrum",
    "Kind",
    "AttractorClass",
    "ScanPoint",
    "ScanResult",
    "lyapunov_spectrum",
    "classify",
    "cold_start",
    "scan_F",
    "scan_FG",
    "write_scan_csv",
]

MAX_TORUS_DIM = 3


@dataclass(frozen=True)
class LyapunovOptions:
    """Averaging settings. ``horizon`` excludes ``transient``; times are in model units."""

    horizon: float = 5000.0
    renorm_interval: float = 0.5
    transient: float = 500.0
    dt: float = DEFAULT_DT
    tol_zero: float = 5e-3
    conv_tol: Optional[float] = None

    def __post_init__(self):
        if not (self.dt > 0 and self.renorm_interval >= self.dt and self.horizon >= 2 * self.renorm_interval):
            raise InvalidArgumentError("need dt > 0, renorm_interval >= dt and horizon >= 2 renorm intervals")
        if self.transient < 0:
            raise InvalidArgumentError("transient must be non-negative")

    @property
    def steps_per_renorm(self) -> int:
        return max(1, int(round(self.renorm_interval / self.dt)))

    @property
    def n_renorm(self) -> int:
        return max(2, int(round(self.horizon / (self.steps_per_renorm * self.dt))))


@dataclass
class LyapunovSpectrum:
    """Leading ``k`` exponents (descending) averaged over ``horizon``.

    ``converged`` compares the estimate at the full horizon with the one at half
    the horizon (absolute tolerance near zero, 25% relative otherwise);
    ``spread`` is the largest such difference.
    """

    exponents: np.ndarray
    horizon: float
    renorm_interval: float
    converged: bool = True
    spread: float = 0.0
    final_state: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return len(self.exponents)

    def __getitem__(self, i):
        return self.exponents[i]


def lyapunov_spectrum(cfg: SystemConfig, x0, k: int | None = None, opts: LyapunovOptions | None = None,
                      Q0=None) -> LyapunovSpectrum:
    """Benettin estimate of the ``k`` largest Lyapunov exponents from ``x0``.

    The state is first advanced over ``opts.transient`` without the frame. The
    frame ``Q0`` (default: first ``k`` unit vectors) is then co-integrated and
    re-orthonormalised by QR every ``renorm_interval``.
    """
    opts = opts or LyapunovOptions()
    k = cfg.n if k is None else int(k)
    if not 1 <= k <= cfg.n:
        raise InvalidArgumentError(f"k must lie in [1, {cfg.n}], got {k}")
    x = _as_state(cfg, x0).copy()
    guard = divergence_guard(cfg, x)
    if opts.transient > 0:
        x = advance(cfg, x, opts.transient, opts.dt, guard)
    Q = np.eye(cfg.n)[:, :k].copy() if Q0 is None else np.linalg.qr(np.asarray(Q0, dtype=np.float64))[0]
    Q = np.ascontiguousarray(Q)
    nr, spr = opts.n_renorm, opts.steps_per_renorm
    running = np.zeros((nr, k))
    status, done = K.lyapunov_run(x, Q, cfg.F, cfg.G, opts.dt, spr, nr, guard, running)
    _raise_status(status, opts.transient + done * spr * opts.dt)
    tau = spr * opts.dt
    full = running[-1] / (nr * tau)
    half_i = nr // 2
    half = running[half_i - 1] / (half_i * tau)
    # the QR loop keeps columns in creation order, which is descending on average
    order = np.argsort(-full, kind="stable")
    drift = np.abs(full - half)
    spread = float(np.max(drift))
    ctol = opts.conv_tol if opts.conv_tol is not None else opts.tol_zero
    # absolute near zero (where classification is decided), relative elsewhere
    ok = bool(np.all(drift <= np.maximum(ctol, 0.25 * np.abs(full))))
    return LyapunovSpectrum(exponents=full[order], horizon=nr * tau, renorm_interval=tau,
                            converged=ok, spread=spread, final_state=x)


class Kind(str, enum.Enum):
    EQUILIBRIUM = "E"
    PERIODIC = "P"
    QUASI_PERIODIC = "Q"
    CHAOTIC = "C"
    UNCLASSIFIED = "U"


@dataclass
class AttractorClass:
    kind: Kind
    torus_dim: int = 0
    evidence: Optional[LyapunovSpectrum] = field(default=None, repr=False)

    @property
    def code(self) -> str:
        if self.kind is Kind.QUASI_PERIODIC:
            return f"Q{self.torus_dim}"
        return self.kind.value

    def __str__(self):
        return self.code


def classify(spectrum: LyapunovSpectrum, tol_zero: float = 5e-3, require_converged: bool = True) -> AttractorClass:
    """Attractor type from the signs of the leading exponents.

    Chaotic if the leading exponent exceeds ``tol_zero``; otherwise the number
    of exponents within ``tol_zero`` of zero gives equilibrium (0), periodic (1)
    or an ``m``-torus. Tori above dimension three and unconverged spectra are
    unclassified.
    """
    ex = np.asarray(spectrum.exponents)
    if require_converged and not spectrum.converged:
        return AttractorClass(Kind.UNCLASSIFIED, evidence=spectrum)
    if ex[0] > tol_zero:
        return AttractorClass(Kind.CHAOTIC, evidence=spectrum)
    m = int(np.sum(np.abs(ex) <= tol_zero))
    if m == 0:
        return AttractorClass(Kind.EQUILIBRIUM, evidence=spectrum)
    if m == 1:
        return AttractorClass(Kind.PERIODIC, evidence=spectrum)
    if m <= MAX_TORUS_DIM and m < len(ex):
        return AttractorClass(Kind.QUASI_PERIODIC, torus_dim=m, evidence=spectrum)
    return AttractorClass(Kind.UNCLASSIFIED, evidence=spectrum)


def cold_start(cfg: SystemConfig) -> np.ndarray:
    """``x_F`` plus the fixed perturbation ``1e-3 e_1``."""
    x = equilibrium(cfg)
    x[0] += 1e-3
    return x


@dataclass
class ScanPoint:
    F: float
    G: float
    cls: AttractorClass
    exponents: np.ndarray
    wave: Optional[int]
    error: Optional[str] = None
    converged: bool = True

    @property
    def label(self) -> str:
        """Class code, with the wave number appended for periodic points (``P2``, ``P3``...)."""
        if self.cls.kind is Kind.PERIODIC and self.wave is not None:
            return f"P{self.wave}"
        return self.cls.code


@dataclass
class ScanResult:
    """Grid of classified points, stored in canonical (F-major, then G ascending) order."""

    points: list[ScanPoint]
    F_values: np.ndarray
    G_values: np.ndarray
    lineage: str

    def onset_of_chaos(self) -> Optional[float]:
        """Smallest F classified chaotic, or None."""
        Fs = [p.F for p in self.points if p.cls.kind is Kind.CHAOTIC]
        return min(Fs) if Fs else None

    def labels(self) -> np.ndarray:
        """Label raster of shape ``(len(F_values), len(G_values))``."""
        out = np.empty((len(self.F_values), len(self.G_values)), dtype=object)
        for i, p in enumerate(self.points):
            out[i // len(self.G_values), i % len(self.G_values)] = p.label
        return out

    def leading(self, i: int = 0) -> np.ndarray:
        return np.array([p.exponents[i] if len(p.exponents) > i else np.nan for p in self.points])


def _scan_point(cfg: SystemConfig, x0, k: int, opts: LyapunovOptions, require_converged: bool):
    try:
        spec = lyapunov_spectrum(cfg, x0, k, opts)
    except DivergenceError as exc:
        p = ScanPoint(cfg.F, cfg.G, AttractorClass(Kind.UNCLASSIFIED), np.full(k, np.nan), None, str(exc))
        return p, None
    cls = classify(spec, opts.tol_zero, require_converged)
    wave = wave_number_or_none(spec.final_state) if cls.kind is not Kind.EQUILIBRIUM else None
    return ScanPoint(cfg.F, cfg.G, cls, spec.exponents, wave, converged=spec.converged), spec.final_state


def _sweep(cfgs: Sequence[SystemConfig], k: int, opts: LyapunovOptions, warm_start: bool,
           first_opts: LyapunovOptions | None, require_converged: bool) -> list[ScanPoint]:
    out = []
    x = None
    for i, cfg in enumerate(cfgs):
        seed = x if (warm_start and x is not None) else cold_start(cfg)
        o = first_opts if (i == 0 and first_opts is not None) else opts
        p, xf = _scan_point(cfg, seed, k, o, require_converged)
        out.append(p)
        # an equilibrium carries no wave to inherit; its uniform offset would not excite a new one
        x = xf if (xf is not None and p.cls.kind is not Kind.EQUILIBRIUM) else None
    return out


def scan_F(template: SystemConfig, F_range: tuple[float, float], steps: int, warm_start: bool = True,
           k: int = 3, opts: LyapunovOptions | None = None, first_opts: LyapunovOptions | None = None,
           require_converged: bool = True) -> ScanResult:
    """Sweep ``steps`` equally spaced F values (``F_range`` order sets the direction).

    With ``warm_start`` each point starts from the predecessor's final state
    (unless that point was an equilibrium), otherwise from :func:`cold_start`. ``first_opts`` may give the first point a
    longer transient. Failed points are recorded as unclassified, as are
    unconverged ones when ``require_converged``.
    """
    if steps < 2:
        raise InvalidArgumentError("a scan needs at least two steps")
    opts = opts or LyapunovOptions()
    k = min(k, template.n)
    Fs = np.linspace(F_range[0], F_range[1], steps)
    pts = _sweep([template.with_params(F=F) for F in Fs], k, opts, warm_start, first_opts, require_converged)
    order = np.argsort(Fs, kind="stable")
    lineage = ("up" if F_range[1] >= F_range[0] else "down") if warm_start else "cold"
    return ScanResult([pts[i] for i in order], Fs[order], np.array([template.G]), lineage)


def scan_FG(template: SystemConfig, F_range: tuple[float, float], G_range: tuple[float, float],
            grid: tuple[int, int], direction: str = "up", k: int = 3, opts: LyapunovOptions | None = None,
            first_opts: LyapunovOptions | None = None, threads: int = 1,
            require_converged: bool = False) -> ScanResult:
    """Two-parameter raster: for each F column, sweep G with warm starts.

    ``direction="up"`` sweeps G from ``G_range[0]`` upwards, ``"down"`` from
    ``G_range[1]`` downwards; each column starts cold. Columns are independent
    and run on ``threads`` worker threads (the kernels release the GIL).
    Rasters use short horizons, so by default every cell is classified from its
    estimate and the convergence flag is only recorded.
    """
    nF, nG = grid
    if nF < 2 or nG < 2:
        raise InvalidArgumentError("grid must be at least 2 x 2")
    if direction not in ("up", "down"):
        raise InvalidArgumentError(f"direction must be 'up' or 'down', got {direction!r}")
    opts = opts or LyapunovOptions()
    k = min(k, template.n)
    Fs = np.linspace(F_range[0], F_range[1], nF)
    Gs = np.linspace(G_range[0], G_range[1], nG)
    Gsweep = Gs if direction == "up" else Gs[::-1]

    def column(F):
        pts = _sweep([template.with_params(F=F, G=G) for G in Gsweep], k, opts, True, first_opts, require_converged)
        return pts if direction == "up" else pts[::-1]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            cols = list(ex.map(column, Fs))
    else:
        cols = [column(F) for F in Fs]
    return ScanResult([p for c in cols for p in c], Fs, Gs, direction)


def write_scan_csv(result: ScanResult, path) -> None:
    """Columns ``F,G,class,lambda1,lambda2,lambda3,wave``; missing values are empty."""
    with open(path, "w", newline="") as fh:
        fh.write("F,G,class,lambda1,lambda2,lambda3,wave\n")
        for p in result.points:
            lams = [f"{v:.17g}" if i < len(p.exponents) and np.isfinite(v) else ""
                    for i, v in enumerate(list(p.exponents[:3]) + [np.nan] * (3 - min(3, len(p.exponents))))]
            wave = "" if p.wave is None else str(p.wave)
            fh.write(f"{p.F:.17g},{p.G:.17g},{p.cls.code},{','.join(lams)},{wave}\n")
