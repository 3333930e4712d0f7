"""Section crossings, periodic orbits, Floquet multipliers and cycle bifurcations.

Periodic orbits are computed by single shooting: unknowns are the anchor
state on the section and the period, the residual is ``phi_T(x0) - x0`` plus
the section condition, and the Newton matrix uses the monodromy matrix
co-integrated with the same RK4 stages as the orbit, so it is the exact
derivative of the discrete flow map.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .errors import DivergenceError, InvalidArgumentError, NoCycleError
from .integrator import DEFAULT_DT, IntegrationSpec, Trajectory, divergence_guard, integrate
from .model import SystemConfig, _as_state, equilibrium

__all__ = [
    "Direction",
    "Section",
    "PeriodicOrbit",
    "CycleKind",
    "CycleBifurcation",
    "BranchPoint",
    "BranchResult",
    "detect_crossings",
    "flow_map_with_monodromy",
    "find_periodic_orbit",
    "continue_cycle",
    "track_cycle_bifurcations",
    "write_branch_csv",
    "events_to_json",
]


class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"
    BOTH = "both"


@dataclass(frozen=True)
class Section:
    """Hyperplane ``x_k = c`` (``k`` is 0-based) crossed in ``direction``."""

    k: int = 0
    c: float = 0.0
    direction: Direction = Direction.UP

    def __post_init__(self):
        if self.k < 0:
            raise InvalidArgumentError(f"section index must be >= 0, got {self.k}")
        object.__setattr__(self, "direction", Direction(self.direction))

    def at(self, c: float) -> "Section":
        return Section(self.k, float(c), self.direction)

    def _accepts(self, s0: float, s1: float) -> bool:
        if self.direction is Direction.UP:
            return s0 < 0.0 <= s1
        if self.direction is Direction.DOWN:
            return s0 > 0.0 >= s1
        return (s0 < 0.0 <= s1) or (s0 > 0.0 >= s1)


def _hermite(t0, h, y0, y1, d0, d1, s):
    """Cubic Hermite interpolant on ``[t0, t0 + h]`` at ``t0 + s*h`` (``y`` may be vectors)."""
    s2, s3 = s * s, s * s * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def _hermite_root(h, y0, y1, d0, d1, tol=1e-10):
    """Root ``s`` in [0, 1] of the scalar Hermite cubic (``y0``, ``y1`` bracket zero)."""
    lo, hi = 0.0, 1.0
    flo = y0
    s = y0 / (y0 - y1) if y0 != y1 else 0.5
    for _ in range(100):
        val = _hermite(0.0, h, y0, y1, d0, d1, s)
        if abs(val) <= tol:
            return s
        if (val < 0) == (flo < 0):
            lo, flo = s, val
        else:
            hi = s
        # Newton step on the cubic, bisection fallback
        ds = 1e-7
        der = (_hermite(0.0, h, y0, y1, d0, d1, s + ds) - val) / ds
        cand = s - val / der if der != 0 else 0.5 * (lo + hi)
        s = cand if lo < cand < hi else 0.5 * (lo + hi)
    return s


def detect_crossings(traj: Trajectory, section: Section, tol: float = 1e-10) -> list[tuple[float, np.ndarray]]:
    """Crossings of ``section`` along a sampled trajectory.

    Each sign change of ``x_k - c`` in the requested direction gives one event;
    time and state come from cubic Hermite interpolation with the stored
    derivatives, refined until the interpolant satisfies ``|x_k - c| <= tol``.
    """
    if section.k >= traj.n:
        raise InvalidArgumentError(f"section index {section.k} outside state of size {traj.n}")
    k = section.k
    s = traj.states[:, k] - section.c
    events = []
    idx = np.nonzero(np.sign(s[:-1]) != np.sign(s[1:]))[0]
    for i in idx:
        if not section._accepts(s[i], s[i + 1]):
            continue
        h = traj.times[i + 1] - traj.times[i]
        frac = _hermite_root(h, s[i], s[i + 1], traj.derivs[i, k], traj.derivs[i + 1, k], tol)
        t = traj.times[i] + frac * h
        state = _hermite(0.0, h, traj.states[i], traj.states[i + 1], traj.derivs[i], traj.derivs[i + 1], frac)
        state[k] = section.c if abs(state[k] - section.c) <= tol else state[k]
        events.append((float(t), state))
    return events


def flow_map_with_monodromy(cfg: SystemConfig, x0, T: float, nsteps: int, guard: float = 0.0):
    """``phi_T(x0)`` and its Jacobian via ``nsteps`` RK4 steps of size ``T / nsteps``."""
    x = np.array(x0, dtype=np.float64, copy=True)
    M = np.eye(cfg.n)
    status, done = K.advance_tangent(x, M, cfg.F, cfg.G, T / nsteps, nsteps, guard)
    if status != K.OK:
        raise DivergenceError("flow map diverged during shooting", done * T / nsteps)
    return x, M


@dataclass
class PeriodicOrbit:
    """Converged periodic orbit anchored on a section.

    ``floquet`` are the eigenvalues of the monodromy matrix (one of them is the
    trivial multiplier near 1); ``section_multipliers`` are the ``n - 1``
    eigenvalues of the linearised return map, i.e. the nontrivial ones.
    """

    cfg: SystemConfig
    anchor: np.ndarray
    period: float
    floquet: np.ndarray
    section_multipliers: np.ndarray
    section: Section
    nsteps: int
    residual: float
    wave_number: Optional[int] = None
    returns: int = 1
    monodromy: Optional[np.ndarray] = field(default=None, repr=False)
    return_map_jacobian: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def trivial_multiplier(self) -> complex:
        return complex(self.floquet[np.argmin(np.abs(self.floquet - 1.0))])

    @property
    def stable(self) -> bool:
        return bool(np.all(np.abs(self.section_multipliers) < 1.0))

    def unstable_count(self, tol: float = 1e-4) -> int:
        return int(np.sum(np.abs(self.section_multipliers) > 1.0 + tol))

    @property
    def dt(self) -> float:
        return self.period / self.nsteps

    def samples(self, per_step: int = 1) -> Trajectory:
        """States along one period at the shooting grid."""
        m = self.nsteps // per_step + 1
        x = self.anchor.copy()
        states = np.empty((m, self.cfg.n))
        derivs = np.empty((m, self.cfg.n))
        K.sample(x, self.cfg.F, self.cfg.G, self.dt, m, per_step, 0.0, states, derivs)
        return Trajectory(self.dt * per_step * np.arange(m), states, derivs, self.cfg)


def _return_map_jacobian(cfg: SystemConfig, x0, M, k: int) -> np.ndarray:
    f0 = np.empty(cfg.n)
    K.rhs(np.asarray(x0, dtype=np.float64), cfg.F, cfg.G, f0)
    if f0[k] == 0.0:
        raise NoCycleError("flow is tangent to the section at the anchor")
    P = M - np.outer(f0, M[k]) / f0[k]
    keep = [i for i in range(cfg.n) if i != k]
    return P[np.ix_(keep, keep)]


def _newton_shoot(cfg, x0, T, nsteps, section, tol, max_iter, guard):
    k, c = section.k, section.c
    n = cfg.n
    x0 = np.array(x0, dtype=np.float64, copy=True)
    fend = np.empty(n)

    def residual(x, T_):
        xe, M = flow_map_with_monodromy(cfg, x, T_, nsteps, guard)
        r = np.empty(n + 1)
        r[:n] = xe - x
        r[n] = x[k] - c
        return r, xe, M

    r, xe, M = residual(x0, T)
    res = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if res <= tol:
            return x0, T, M, res
        K.rhs(xe, cfg.F, cfg.G, fend)
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = M - np.eye(n)
        A[:n, n] = fend
        A[n, k] = 1.0
        try:
            delta = np.linalg.solve(A, -r)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(A, -r, rcond=None)[0]
        alpha = 1.0
        accepted = False
        for _ls in range(10):
            xn = x0 + alpha * delta[:n]
            Tn = T + alpha * delta[n]
            if Tn > 0:
                try:
                    rn, xen, Mn = residual(xn, Tn)
                except DivergenceError:
                    rn = None
                if rn is not None and np.all(np.isfinite(rn)):
                    resn = float(np.max(np.abs(rn)))
                    if resn < res or alpha < 1e-2:
                        accepted = True
                        break
            alpha *= 0.5
        if not accepted:
            break
        x0, T, r, xe, M, res = xn, Tn, rn, xen, Mn, resn
    if res <= tol:
        return x0, T, M, res
    raise NoCycleError(f"shooting Newton did not converge (residual {res:.3g})")


def _count_returns(orbit_traj: Trajectory, section: Section) -> int:
    s = orbit_traj.states[:, section.k] - section.c
    count = 0
    for i in range(len(s) - 1):
        if section._accepts(s[i], s[i + 1]):
            count += 1
    return max(count, 1)


def _build_orbit(cfg, x0, T, M, res, section, nsteps) -> PeriodicOrbit:
    from .waves import wave_number_or_none

    floquet = np.linalg.eigvals(M)
    floquet = floquet[np.argsort(-np.abs(floquet), kind="stable")]
    D = _return_map_jacobian(cfg, x0, M, section.k)
    mults = np.linalg.eigvals(D)
    mults = mults[np.argsort(-np.abs(mults), kind="stable")]
    orbit = PeriodicOrbit(
        cfg=cfg, anchor=np.asarray(x0, dtype=np.float64), period=float(T), floquet=floquet,
        section_multipliers=mults, section=section, nsteps=nsteps, residual=res,
        wave_number=wave_number_or_none(x0), monodromy=M, return_map_jacobian=D,
    )
    orbit.returns = _count_returns(orbit.samples(), section)
    return orbit


def _initial_guess_from_flow(cfg, guess, section, dt, search_time, close_tol):
    spec = IntegrationSpec(t_end=search_time, dt=dt, transient=0.0)
    traj = integrate(cfg, guess, spec)
    if section is None:
        section = Section(0, float(np.mean(traj.states[:, 0])), Direction.UP)
    events = detect_crossings(traj, section)
    if len(events) < 2:
        raise NoCycleError("trajectory does not return to the section")
    t0, a0 = events[0]
    scale = max(1.0, float(np.max(np.std(traj.states, axis=0))))
    dists = [float(np.linalg.norm(e[1] - a0)) for e in events[1:]]
    m = next((i + 1 for i, d in enumerate(dists) if d < close_tol * scale), None)
    if m is None:
        m = int(np.argmin(dists)) + 1
    return a0, events[m][0] - t0, section


def find_periodic_orbit(
    cfg: SystemConfig,
    guess,
    section: Section | None = None,
    *,
    period: float | None = None,
    dt: float = DEFAULT_DT,
    tol: float = 1e-9,
    max_iter: int = 40,
    search_time: float = 200.0,
    close_tol: float = 0.05,
    nsteps: int | None = None,
) -> PeriodicOrbit:
    """Newton-refined periodic orbit near ``guess``.

    Without ``period``, the flow from ``guess`` is followed until it first comes
    back close to its first section crossing; that return (possibly the m-th
    one) fixes the anchor and the period estimate. Without ``section``, the
    section is ``x_1 = <x_1>`` crossed upwards. Raises :class:`NoCycleError` when
    Newton fails or collapses onto an equilibrium.
    """
    guess = _as_state(cfg, guess)
    if period is None:
        anchor, T, section = _initial_guess_from_flow(cfg, guess, section, dt, search_time, close_tol)
    else:
        if section is None:
            section = Section(0, float(guess[0]), Direction.UP)
        anchor, T = guess.copy(), float(period)
    if section.k >= cfg.n:
        raise InvalidArgumentError(f"section index {section.k} outside state of size {cfg.n}")
    if nsteps is None:
        nsteps = max(int(math.ceil(T / dt)), 16)
    guard = divergence_guard(cfg, anchor)
    x0, T, M, res = _newton_shoot(cfg, anchor, T, nsteps, section, tol, max_iter, guard)
    orbit = _build_orbit(cfg, x0, T, M, res, section, nsteps)
    spread = float(np.max(np.ptp(orbit.samples().states, axis=0)))
    if spread < 1e-6:
        raise NoCycleError("Newton converged onto an equilibrium")
    return orbit


def reanchor(orbit: PeriodicOrbit) -> PeriodicOrbit:
    """Same orbit, re-anchored where ``x_k`` increases fastest.

    Keeps the phase condition transversal as the orbit deforms along a branch.
    """
    traj = orbit.samples()
    k = orbit.section.k
    i = int(np.argmax(traj.derivs[:-1, k]))
    if traj.derivs[i, k] <= 0.0:
        return orbit
    anchor = traj.states[i]
    sec = Section(k, float(anchor[k]), Direction.UP)
    x0, T, M, res = _newton_shoot(orbit.cfg, anchor, orbit.period, orbit.nsteps, sec, max(orbit.residual, 1e-9), 20,
                                  divergence_guard(orbit.cfg, anchor))
    return _build_orbit(orbit.cfg, x0, T, M, res, sec, orbit.nsteps)


class CycleKind(str, enum.Enum):
    FOLD = "Fold"
    PERIOD_DOUBLING = "PeriodDoubling"
    NEIMARK_SACKER = "NeimarkSacker"


@dataclass(frozen=True)
class CycleBifurcation:
    kind: CycleKind
    F_value: float
    multiplier: complex
    period_multiplicity: int = 1
    terminal: bool = False

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "F": self.F_value,
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "period_multiplicity": self.period_multiplicity,
            "terminal": self.terminal,
        }


@dataclass
class BranchPoint:
    F: float
    period: float
    stable: bool
    multipliers: np.ndarray
    period_multiplicity: int
    wave_number: Optional[int]


@dataclass
class BranchResult:
    points: list[BranchPoint]
    events: list[CycleBifurcation]
    final_orbit: Optional[PeriodicOrbit] = None


def _classify_multiplier(mu: complex, arg_tol: float = 0.1) -> CycleKind:
    a = abs(math.atan2(mu.imag, mu.real))
    if a < arg_tol:
        return CycleKind.FOLD
    if abs(a - math.pi) < arg_tol:
        return CycleKind.PERIOD_DOUBLING
    return CycleKind.NEIMARK_SACKER


def _same_orbit(prev: PeriodicOrbit, new: PeriodicOrbit, rel: float = 0.2) -> bool:
    return abs(new.period - prev.period) <= rel * prev.period


def _solve_at(orbit: PeriodicOrbit, F: float, tol: float) -> PeriodicOrbit:
    cfg = orbit.cfg.with_params(F=F)
    sec = orbit.section.at(orbit.anchor[orbit.section.k])
    guard = divergence_guard(cfg, orbit.anchor)
    x0, T, M, res = _newton_shoot(cfg, orbit.anchor, orbit.period, orbit.nsteps, sec, tol, 25, guard)
    new = _build_orbit(cfg, x0, T, M, res, sec, orbit.nsteps)
    if not _same_orbit(orbit, new):
        raise NoCycleError("continuation jumped to a different orbit")
    if float(np.max(np.ptp(new.samples(8).states, axis=0))) < 1e-6:
        raise NoCycleError("cycle collapsed onto the equilibrium")
    return new


def _crossing_multiplier(a: PeriodicOrbit, b: PeriodicOrbit) -> complex:
    cands = np.concatenate([a.section_multipliers, b.section_multipliers])
    return complex(cands[np.argmin(np.abs(np.abs(cands) - 1.0))])


def _switch_to_doubled(orbit: PeriodicOrbit, tol: float) -> Optional[PeriodicOrbit]:
    """Orbit of twice the period bifurcating from ``orbit`` (past a period doubling)."""
    cfg = orbit.cfg
    D = orbit.return_map_jacobian
    w, V = np.linalg.eig(D)
    i = int(np.argmin(np.abs(w + 1.0)))
    v = np.real(V[:, i])
    v = np.insert(v, orbit.section.k, 0.0)
    v /= np.linalg.norm(v)
    scale = max(1.0, float(np.max(np.ptp(orbit.samples(8).states, axis=0))))
    sec = orbit.section.at(orbit.anchor[orbit.section.k])
    guard = divergence_guard(cfg, orbit.anchor)
    for eps in (0.05, -0.05, 0.1, -0.1, 0.02, -0.02, 0.2, -0.2):
        try:
            x0, T, M, res = _newton_shoot(cfg, orbit.anchor + eps * scale * v, 2 * orbit.period,
                                          2 * orbit.nsteps, sec, tol, 30, guard)
        except (NoCycleError, DivergenceError):
            continue
        half, _ = flow_map_with_monodromy(cfg, x0, T / 2, orbit.nsteps, guard)
        if np.linalg.norm(half - x0) > 1e-4 * scale and abs(T - 2 * orbit.period) < 0.2 * orbit.period:
            return _build_orbit(cfg, x0, T, M, res, sec, 2 * orbit.nsteps)
    return None


def _attractor_orbit(cfg, guess, section, dt, transient) -> PeriodicOrbit:
    if guess is None:
        guess = equilibrium(cfg)
        guess[0] += 1e-3
    x = _as_state(cfg, guess).copy()
    if transient > 0:
        from .integrator import advance
        x = advance(cfg, x, transient, dt)
    return find_periodic_orbit(cfg, x, section, dt=dt)


def continue_cycle(
    cfg: SystemConfig,
    F_range: tuple[float, float],
    step: float = 1e-2,
    *,
    section: Section | None = None,
    guess=None,
    orbit: PeriodicOrbit | None = None,
    dt: float = DEFAULT_DT,
    transient: float = 500.0,
    min_step: float = 1e-5,
    bisect_width: float = 1e-3,
    mult_tol: float = 1e-4,
    tol: float = 1e-9,
    follow_period_doubling: bool = True,
    max_doublings: int = 3,
    on_point: Callable[[BranchPoint], None] | None = None,
) -> BranchResult:
    """Natural-parameter continuation of a cycle in F with multiplier monitoring.

    Starts from ``orbit`` or from the attractor reached from ``guess`` at
    ``F_range[0]``. Each change in the number of multipliers outside the unit
    circle is bracketed by bisection to ``bisect_width`` and labelled by the
    argument of the crossing multiplier. After a period doubling the doubled
    orbit is followed instead (up to ``max_doublings`` times). The branch ends
    with a terminal Fold when Newton fails at step ``min_step``.
    """
    F0, F1 = map(float, F_range)
    sgn = 1.0 if F1 >= F0 else -1.0
    if orbit is None:
        orbit = _attractor_orbit(cfg.with_params(F=F0), guess, section, dt, transient)
    orbit = reanchor(orbit)
    mult = 1
    points: list[BranchPoint] = []
    events: list[CycleBifurcation] = []

    def record(o: PeriodicOrbit):
        bp = BranchPoint(o.cfg.F, o.period, o.stable, o.section_multipliers.copy(), mult, o.wave_number)
        points.append(bp)
        if on_point is not None:
            on_point(bp)

    record(orbit)
    h = step
    F = orbit.cfg.F
    while sgn * (F1 - F) > 1e-12:
        Fn = F + sgn * min(h, abs(F1 - F))
        try:
            new = _solve_at(orbit, Fn, tol)
        except (NoCycleError, DivergenceError):
            h *= 0.5
            if h < min_step:
                mu = complex(orbit.section_multipliers[np.argmin(np.abs(orbit.section_multipliers - 1.0))])
                events.append(CycleBifurcation(CycleKind.FOLD, F, mu, mult, terminal=True))
                break
            continue
        if new.unstable_count(mult_tol) != orbit.unstable_count(mult_tol):
            a, b = orbit, new
            while abs(b.cfg.F - a.cfg.F) > bisect_width:
                Fm = 0.5 * (a.cfg.F + b.cfg.F)
                try:
                    m_orb = _solve_at(a, Fm, tol)
                except (NoCycleError, DivergenceError):
                    break
                if m_orb.unstable_count(mult_tol) == a.unstable_count(mult_tol):
                    a = m_orb
                else:
                    b = m_orb
            mu = _crossing_multiplier(a, b)
            kind = _classify_multiplier(mu)
            events.append(CycleBifurcation(kind, 0.5 * (a.cfg.F + b.cfg.F), mu, mult))
            if (kind is CycleKind.PERIOD_DOUBLING and follow_period_doubling and mult < 2 ** max_doublings
                    and b.unstable_count(mult_tol) > a.unstable_count(mult_tol)):
                F_sw = b.cfg.F + sgn * min(step, abs(F1 - b.cfg.F))
                try:
                    past = _solve_at(b, F_sw, tol) if F_sw != b.cfg.F else b
                    doubled = _switch_to_doubled(past, tol)
                except (NoCycleError, DivergenceError):
                    doubled = None
                if doubled is not None:
                    mult *= 2
                    orbit = reanchor(doubled)
                    F = orbit.cfg.F
                    record(orbit)
                    h = step
                    continue
        orbit = reanchor(new)
        F = orbit.cfg.F
        record(orbit)
        h = min(2 * h, step)
    return BranchResult(points, events, orbit)


def track_cycle_bifurcations(
    cfg: SystemConfig,
    section: Section | None,
    F_range: tuple[float, float],
    step: float = 1e-2,
    **kwargs,
) -> list[CycleBifurcation]:
    """Bifurcation events (fold, period doubling, Neimark-Sacker) along a continued cycle."""
    return continue_cycle(cfg, F_range, step, section=section, **kwargs).events


def write_branch_csv(result: BranchResult, path) -> None:
    """Columns ``F,T,stable,mu1_re,mu1_im,...``; multipliers sorted by decreasing modulus."""
    m = max((len(p.multipliers) for p in result.points), default=0)
    cols = ["F", "T", "stable"]
    for i in range(m):
        cols += [f"mu{i + 1}_re", f"mu{i + 1}_im"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for p in result.points:
            row = [f"{p.F:.17g}", f"{p.period:.17g}", "1" if p.stable else "0"]
            for mu in p.multipliers:
                row += [f"{mu.real:.17g}", f"{mu.imag:.17g}"]
            row += [""] * (len(cols) - len(row))
            fh.write(",".join(row) + "\n")


def events_to_json(events: list[CycleBifurcation]) -> list[dict]:
    return [e.to_json() for e in events]
