"""Compiled inner loop for explicit RK4 on u_t = (mu - R(u)) / 2.

The round Laplacian commutes with the reflection xi -> pi - xi, so it is
applied as two half-size blocks acting on the even and odd parts of u.
"""

import numpy as np
from numba import njit

OK = 0
BLOWUP = 1


@njit(cache=True)
def _velocity(u, lap_e, lap_o, w, out):
    """Write (mu - R)/2 into out and return sup |mu - R|."""
    N = u.size
    M = N // 2
    a = np.empty(M)
    b = np.empty(M)
    for i in range(M):
        a[i] = 0.5 * (u[i] + u[N - 1 - i])
        b[i] = 0.5 * (u[i] - u[N - 1 - i])
    la = lap_e @ a
    lb = lap_o @ b
    s_curv = 0.0
    s_area = 0.0
    for i in range(M):
        j = N - 1 - i
        li = la[i] + lb[i]
        lj = la[i] - lb[i]
        ei = np.exp(2.0 * u[i])
        ej = np.exp(2.0 * u[j])
        out[i] = (1.0 - li) / ei
        out[j] = (1.0 - lj) / ej
        s_curv += w[i] * (1.0 - li) + w[j] * (1.0 - lj)
        s_area += w[i] * ei + w[j] * ej
    mu = s_curv / s_area
    sup = 0.0
    for i in range(N):
        d = mu - out[i]
        out[i] = 0.5 * d
        if abs(d) > sup:
            sup = abs(d)
    return sup


@njit(cache=True)
def rk4_steps(u, u_ref, lap_e, lap_o, w, dt, nsteps, log_floor, acc):
    """Advance u in place by nsteps RK4 steps of size dt.

    acc holds running accumulators and is updated in place:
      acc[0] = int sup|mu - R| dt (trapezoid over steps)
      acc[1], acc[2] = min, max over nodes and steps of 2 (u - u_ref)
      acc[3] = steps taken
    Returns (status, sup|mu - R| at the final state). On blow-up u holds the
    last valid state.
    """
    N = u.size
    k1 = np.empty(N)
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    tmp = np.empty(N)
    g0 = 2.0 * _velocity(u, lap_e, lap_o, w, k1)
    for _ in range(nsteps):
        for i in range(N):
            tmp[i] = u[i] + 0.5 * dt * k1[i]
        _velocity(tmp, lap_e, lap_o, w, k2)
        for i in range(N):
            tmp[i] = u[i] + 0.5 * dt * k2[i]
        _velocity(tmp, lap_e, lap_o, w, k3)
        for i in range(N):
            tmp[i] = u[i] + dt * k3[i]
        _velocity(tmp, lap_e, lap_o, w, k4)
        bad = False
        for i in range(N):
            tmp[i] = u[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(tmp[i]) or 2.0 * tmp[i] < log_floor:
                bad = True
        if bad:
            return BLOWUP, g0
        lo = acc[1]
        hi = acc[2]
        for i in range(N):
            u[i] = tmp[i]
            d = 2.0 * (u[i] - u_ref[i])
            if d < lo:
                lo = d
            if d > hi:
                hi = d
        acc[1] = lo
        acc[2] = hi
        g1 = 2.0 * _velocity(u, lap_e, lap_o, w, k1)
        acc[0] += 0.5 * dt * (g0 + g1)
        acc[3] += 1.0
        g0 = g1
    return OK, g0
