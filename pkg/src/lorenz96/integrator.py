"""Fixed-step RK4 integration of trajectories and of the tangent flow."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .errors import DivergenceError, InvalidArgumentError
from .model import SystemConfig, _as_state, trapping_radius, vector_field

__all__ = [
    "DEFAULT_DT",
    "IntegrationSpec",
    "Trajectory",
    "rk4_step",
    "integrate",
    "integrate_with_tangent",
    "advance",
    "divergence_guard",
    "write_trajectory_csv",
]

DEFAULT_DT = 1.0 / 64.0


@dataclass(frozen=True)
class IntegrationSpec:
    t_end: float
    dt: float = DEFAULT_DT
    transient: float = 500.0
    sample_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if not self.t_end > self.transient >= 0:
            raise InvalidArgumentError(
                f"need t_end > transient >= 0, got t_end={self.t_end}, transient={self.transient}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise InvalidArgumentError(f"sample_every must be a positive integer, got {self.sample_every}")

    @property
    def transient_steps(self) -> int:
        return int(round(self.transient / self.dt))

    @property
    def total_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def n_samples(self) -> int:
        return (self.total_steps - self.transient_steps) // self.sample_every + 1


@dataclass
class Trajectory:
    """Uniformly sampled trajectory; ``derivs`` holds the vector field at each sample."""

    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    cfg: Optional[SystemConfig] = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1].copy()

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def divergence_guard(cfg: SystemConfig, x0) -> float:
    """Component bound that no bona fide trajectory can reach; 0 disables the check.

    The norm never exceeds ``max(|x0|, R)`` inside the trapping regime, so a
    tenfold margin only trips on numerical blow-up.
    """
    if not cfg.G > -0.25:
        return 0.0
    R = trapping_radius(cfg)
    return 10.0 * max(R, float(np.linalg.norm(x0)), 1.0)


def _raise_status(status: int, t: float) -> None:
    if status == K.NONFINITE:
        raise DivergenceError(f"non-finite state at t = {t:.6g}", t)
    if status == K.GUARD:
        raise DivergenceError(f"state left the guard ball at t = {t:.6g}", t)


def rk4_step(cfg: SystemConfig, x, dt: float) -> np.ndarray:
    """One classical RK4 step of the vector field."""
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    x = _as_state(cfg, x)
    k1 = vector_field(cfg, x)
    k2 = vector_field(cfg, x + 0.5 * dt * k1)
    k3 = vector_field(cfg, x + 0.5 * dt * k2)
    k4 = vector_field(cfg, x + dt * k3)
    out = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite state after RK4 step", dt)
    return out


def advance(cfg: SystemConfig, x0, t: float, dt: float = DEFAULT_DT, guard: float | None = None) -> np.ndarray:
    """State after time ``t`` (rounded to whole steps); nothing is stored."""
    x = _as_state(cfg, x0).copy()
    if guard is None:
        guard = divergence_guard(cfg, x)
    nsteps = int(round(t / dt))
    status, done = K.advance(x, cfg.F, cfg.G, dt, nsteps, guard)
    _raise_status(status, done * dt)
    return x


def integrate(cfg: SystemConfig, x0, spec: IntegrationSpec) -> Trajectory:
    """Integrate from ``x0`` at t = 0 and sample from ``t = transient`` on."""
    x = _as_state(cfg, x0).copy()
    guard = divergence_guard(cfg, x)
    status, done = K.advance(x, cfg.F, cfg.G, spec.dt, spec.transient_steps, guard)
    _raise_status(status, done * spec.dt)
    m = spec.n_samples
    states = np.empty((m, cfg.n))
    derivs = np.empty((m, cfg.n))
    status, got = K.sample(x, cfg.F, cfg.G, spec.dt, m, spec.sample_every, guard, states, derivs)
    t0 = spec.transient_steps * spec.dt
    step = spec.dt * spec.sample_every
    _raise_status(status, t0 + got * step)
    times = t0 + step * np.arange(m)
    return Trajectory(times, states, derivs, cfg)


HookFn = Callable[[float, np.ndarray, np.ndarray], Optional[np.ndarray]]


def integrate_with_tangent(
    cfg: SystemConfig,
    x0,
    Q0,
    spec: IntegrationSpec,
    checkpoint_every: int | None = None,
    on_checkpoint: HookFn | None = None,
) -> tuple[Trajectory, np.ndarray]:
    """Co-integrate ``k`` tangent vectors with the flow, using the same RK4 stages.

    The transient is integrated without the frame; the frame starts at
    ``t = transient``. Every ``checkpoint_every`` steps ``on_checkpoint(t, x, Q)``
    is called; if it returns an array, that array replaces the frame (this is
    where a caller re-orthonormalises). Returns the sampled trajectory and the
    final frame.
    """
    x = _as_state(cfg, x0).copy()
    Q = np.array(Q0, dtype=np.float64, copy=True)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.shape[0] != cfg.n or not 1 <= Q.shape[1] <= cfg.n:
        raise InvalidArgumentError(f"frame has shape {Q.shape}, expected ({cfg.n}, k) with 1 <= k <= n")
    gram = Q.T @ Q
    if not np.allclose(gram, np.eye(Q.shape[1]), atol=1e-8) and np.any(Q):
        raise InvalidArgumentError("initial frame must have orthonormal columns")
    guard = divergence_guard(cfg, x)
    dt = spec.dt
    status, done = K.advance(x, cfg.F, cfg.G, dt, spec.transient_steps, guard)
    _raise_status(status, done * dt)

    m = spec.n_samples
    stride = spec.sample_every
    states = np.empty((m, cfg.n))
    derivs = np.empty((m, cfg.n))
    d = np.empty(cfg.n)
    states[0] = x
    K.rhs(x, cfg.F, cfg.G, d)
    derivs[0] = d
    total = (m - 1) * stride
    ck = checkpoint_every if checkpoint_every else total + 1
    step = 0
    next_sample, next_ck, isample = stride, ck, 1
    t0 = spec.transient_steps * dt
    while step < total:
        target = min(next_sample, next_ck, total)
        status, done = K.advance_tangent(x, Q, cfg.F, cfg.G, dt, target - step, guard)
        _raise_status(status, t0 + (step + done) * dt)
        step = target
        if step == next_sample:
            states[isample] = x
            K.rhs(x, cfg.F, cfg.G, d)
            derivs[isample] = d
            isample += 1
            next_sample += stride
        if step == next_ck:
            if on_checkpoint is not None:
                repl = on_checkpoint(t0 + step * dt, x.copy(), Q.copy())
                if repl is not None:
                    Q = np.ascontiguousarray(repl, dtype=np.float64)
            next_ck += ck
    times = t0 + dt * stride * np.arange(m)
    return Trajectory(times, states, derivs, cfg), Q


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Header ``t,x1,...,xn``; 17 significant digits."""
    header = ",".join(["t"] + [f"x{j + 1}" for j in range(traj.n)])
    data = np.column_stack([traj.times, traj.states])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

