"""Compiled inner loops: RK4 for the flow and for the tangent (variational) flow.

All kernels take the state as a 1-D float64 array and the tangent frame as an
``(n, k)`` float64 array. Status codes: 0 ok, 1 non-finite, 2 guard exceeded.
"""
import numpy as np
from numba import njit

OK = 0
NONFINITE = 1
GUARD = 2


@njit(cache=True, nogil=True)
def rhs(x, F, G, out):
    n = x.shape[0]
    for j in range(n):
        xm1 = x[(j - 1) % n]
        xp1 = x[(j + 1) % n]
        xm2 = x[(j - 2) % n]
        out[j] = xm1 * (xp1 - xm2) - x[j] + G * (xm1 - 2.0 * x[j] + xp1) + F


@njit(cache=True, nogil=True)
def tangent_rhs(x, Q, G, out):
    n, k = Q.shape
    for j in range(n):
        jm1 = (j - 1) % n
        jp1 = (j + 1) % n
        jm2 = (j - 2) % n
        a = x[jm1]
        b = x[jp1] - x[jm2]
        for c in range(k):
            out[j, c] = (a * (Q[jp1, c] - Q[jm2, c]) + Q[jm1, c] * b - Q[j, c]
                         + G * (Q[jm1, c] - 2.0 * Q[j, c] + Q[jp1, c]))


@njit(cache=True, nogil=True)
def _check(x, guard):
    for j in range(x.shape[0]):
        v = x[j]
        if not np.isfinite(v):
            return NONFINITE
        if guard > 0.0 and abs(v) > guard:
            return GUARD
    return OK


@njit(cache=True, nogil=True)
def rk4_step_inplace(x, F, G, dt, k1, k2, k3, k4, y):
    n = x.shape[0]
    rhs(x, F, G, k1)
    for j in range(n):
        y[j] = x[j] + 0.5 * dt * k1[j]
    rhs(y, F, G, k2)
    for j in range(n):
        y[j] = x[j] + 0.5 * dt * k2[j]
    rhs(y, F, G, k3)
    for j in range(n):
        y[j] = x[j] + dt * k3[j]
    rhs(y, F, G, k4)
    for j in range(n):
        x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


@njit(cache=True, nogil=True)
def advance(x, F, G, dt, nsteps, guard):
    """Advance ``x`` in place by ``nsteps`` RK4 steps. Returns (status, steps_done)."""
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    y = np.empty(n)
    for s in range(nsteps):
        rk4_step_inplace(x, F, G, dt, k1, k2, k3, k4, y)
        st = _check(x, guard)
        if st != OK:
            return st, s + 1
    return OK, nsteps


@njit(cache=True, nogil=True)
def sample(x, F, G, dt, nsamples, stride, guard, states, derivs):
    """Record ``nsamples`` states (and derivatives) every ``stride`` steps, starting with ``x``."""
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    y = np.empty(n)
    d = np.empty(n)
    for i in range(nsamples):
        if i > 0:
            for s in range(stride):
                rk4_step_inplace(x, F, G, dt, k1, k2, k3, k4, y)
            st = _check(x, guard)
            if st != OK:
                return st, i
        states[i, :] = x
        rhs(x, F, G, d)
        derivs[i, :] = d
    return OK, nsamples


@njit(cache=True, nogil=True)
def rk4_tangent_step(x, Q, F, G, dt, ws):
    """One RK4 step of the coupled flow and tangent frame, in place.

    ``ws`` is a tuple of preallocated work arrays.
    """
    k1, k2, k3, k4, y, K1, K2, K3, K4, Y = ws
    n, k = Q.shape
    rhs(x, F, G, k1)
    tangent_rhs(x, Q, G, K1)
    for j in range(n):
        y[j] = x[j] + 0.5 * dt * k1[j]
        for c in range(k):
            Y[j, c] = Q[j, c] + 0.5 * dt * K1[j, c]
    rhs(y, F, G, k2)
    tangent_rhs(y, Y, G, K2)
    for j in range(n):
        y[j] = x[j] + 0.5 * dt * k2[j]
        for c in range(k):
            Y[j, c] = Q[j, c] + 0.5 * dt * K2[j, c]
    rhs(y, F, G, k3)
    tangent_rhs(y, Y, G, K3)
    for j in range(n):
        y[j] = x[j] + dt * k3[j]
        for c in range(k):
            Y[j, c] = Q[j, c] + dt * K3[j, c]
    rhs(y, F, G, k4)
    tangent_rhs(y, Y, G, K4)
    h6 = dt / 6.0
    for j in range(n):
        x[j] += h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        for c in range(k):
            Q[j, c] += h6 * (K1[j, c] + 2.0 * K2[j, c] + 2.0 * K3[j, c] + K4[j, c])


@njit(cache=True, nogil=True)
def make_ws(n, k):
    return (np.empty(n), np.empty(n), np.empty(n), np.empty(n), np.empty(n),
            np.empty((n, k)), np.empty((n, k)), np.empty((n, k)), np.empty((n, k)), np.empty((n, k)))


@njit(cache=True, nogil=True)
def advance_tangent(x, Q, F, G, dt, nsteps, guard):
    """Advance state and frame in place by ``nsteps`` steps. Returns (status, steps_done)."""
    n, k = Q.shape
    ws = make_ws(n, k)
    for s in range(nsteps):
        rk4_tangent_step(x, Q, F, G, dt, ws)
        st = _check(x, guard)
        if st != OK:
            return st, s + 1
    return OK, nsteps


@njit(cache=True, nogil=True)
def lyapunov_run(x, Q, F, G, dt, steps_per_renorm, n_renorm, guard, running):
    """Benettin/QR loop. ``x`` and ``Q`` are updated in place.

    ``running[i, :]`` receives the cumulative log-stretch sums after renormalisation ``i``.
    Returns (status, renormalisations_done).
    """
    n, k = Q.shape
    ws = make_ws(n, k)
    acc = np.zeros(k)
    for i in range(n_renorm):
        for s in range(steps_per_renorm):
            rk4_tangent_step(x, Q, F, G, dt, ws)
        st = _check(x, guard)
        if st != OK:
            return st, i
        q, r = np.linalg.qr(Q)
        for c in range(k):
            d = r[c, c]
            if d < 0.0:
                for j in range(n):
                    q[j, c] = -q[j, c]
                d = -d
            acc[c] += np.log(d)
        Q[:, :] = q
        running[i, :] = acc
    return OK, n_renorm
