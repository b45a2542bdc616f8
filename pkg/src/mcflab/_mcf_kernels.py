"""Hot loops of the radial MCF discretisation.

Each kernel exists twice: a loop version compiled with numba and a vectorised
numpy version used when numba is missing or disabled.  Both evaluate

    rhs_i = (wp_i A(q+) - wm_i A(q-)) / h + kp_i B(q+) + km_i B(q-) + corr_i

with A = arctan, B(q) = q - arctan(q) and one-sided slopes q+/q-.  Node 0 is
either the symmetric origin (rhs_0 = 2n(u_1 - u_0)/h^2) or an inner Dirichlet
node; the last node is always Dirichlet.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_banded

from ._accel import HAVE_NUMBA, maybe_njit


# --- compiled versions --------------------------------------------------------

@maybe_njit
def _rhs_loop(u, n, h, wp, wm, kp, km, corr, origin, out):
    M = u.shape[0] - 1
    inv_h = 1.0 / h
    qm = (u[1] - u[0]) * inv_h
    am = math.atan(qm)
    for i in range(1, M):
        qp = (u[i + 1] - u[i]) * inv_h
        ap = math.atan(qp)
        out[i] = (wp[i] * ap - wm[i] * am) * inv_h + kp[i] * (qp - ap) + km[i] * (qm - am) + corr[i]
        qm = qp
        am = ap
    if origin:
        out[0] = 2.0 * n * (u[1] - u[0]) * inv_h * inv_h + corr[0]
    else:
        out[0] = 0.0
    out[M] = 0.0


@maybe_njit
def _advance_loop(u, n, h, wp, wm, kp, km, corr, origin, dt, g_out, g_in, nsteps):
    M = u.shape[0] - 1
    buf = np.empty_like(u)
    lo = 0 if origin else 1
    for s in range(nsteps):
        _rhs_loop(u, n, h, wp, wm, kp, km, corr, origin, buf)
        for i in range(lo, M):
            u[i] += dt * buf[i]
        u[M] = g_out[s]
        if not origin:
            u[0] = g_in[s]


@maybe_njit
def _jacobian_loop(u, n, h, wp, wm, kp, km, origin, lower, diag, upper):
    """Tridiagonal d rhs / d u; lower[i] couples i to i-1, upper[i] to i+1."""
    M = u.shape[0] - 1
    inv_h = 1.0 / h
    inv_h2 = inv_h * inv_h
    for i in range(1, M):
        qp = (u[i + 1] - u[i]) * inv_h
        qm = (u[i] - u[i - 1]) * inv_h
        ap = 1.0 / (1.0 + qp * qp)
        am = 1.0 / (1.0 + qm * qm)
        bp = 1.0 - ap
        bm = 1.0 - am
        up = wp[i] * ap * inv_h2 + kp[i] * bp * inv_h
        lw = wm[i] * am * inv_h2 - km[i] * bm * inv_h
        upper[i] = up
        lower[i] = lw
        diag[i] = -up - lw
    if origin:
        diag[0] = -2.0 * n * inv_h2
        upper[0] = 2.0 * n * inv_h2
    else:
        diag[0] = 0.0
        upper[0] = 0.0
    lower[0] = 0.0
    lower[M] = 0.0
    diag[M] = 0.0
    upper[M] = 0.0


@maybe_njit
def _thomas(lower, diag, upper, rhs):
    N = diag.shape[0]
    c = np.empty(N)
    d = np.empty(N)
    x = np.empty(N)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, N):
        m = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / m
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m
    x[N - 1] = d[N - 1]
    for i in range(N - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


# --- numpy versions -------------------------------------------------------------

def _rhs_numpy(u, n, h, wp, wm, kp, km, corr, origin, out):
    q = np.diff(u) / h
    a = np.arctan(q)
    b = q - a
    out[1:-1] = (wp[1:-1] * a[1:] - wm[1:-1] * a[:-1]) / h + kp[1:-1] * b[1:] + km[1:-1] * b[:-1] + corr[1:-1]
    out[0] = 2.0 * n * (u[1] - u[0]) / (h * h) + corr[0] if origin else 0.0
    out[-1] = 0.0


def _advance_numpy(u, n, h, wp, wm, kp, km, corr, origin, dt, g_out, g_in, nsteps):
    buf = np.empty_like(u)
    lo = 0 if origin else 1
    for s in range(nsteps):
        _rhs_numpy(u, n, h, wp, wm, kp, km, corr, origin, buf)
        u[lo:-1] += dt * buf[lo:-1]
        u[-1] = g_out[s]
        if not origin:
            u[0] = g_in[s]


def _jacobian_numpy(u, n, h, wp, wm, kp, km, origin, lower, diag, upper):
    q = np.diff(u) / h
    a = 1.0 / (1.0 + q * q)
    b = 1.0 - a
    up = wp[1:-1] * a[1:] / (h * h) + kp[1:-1] * b[1:] / h
    lw = wm[1:-1] * a[:-1] / (h * h) - km[1:-1] * b[:-1] / h
    upper[1:-1] = up
    lower[1:-1] = lw
    diag[1:-1] = -up - lw
    diag[0] = -2.0 * n / (h * h) if origin else 0.0
    upper[0] = -diag[0]
    lower[0] = lower[-1] = diag[-1] = upper[-1] = 0.0


def _thomas_numpy(lower, diag, upper, rhs):
    ab = np.zeros((3, diag.size))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs)


if HAVE_NUMBA:
    rhs_kernel = _rhs_loop
    advance_kernel = _advance_loop
    jacobian_kernel = _jacobian_loop
    tridiagonal_solve = _thomas
else:
    rhs_kernel = _rhs_numpy
    advance_kernel = _advance_numpy
    jacobian_kernel = _jacobian_numpy
    tridiagonal_solve = _thomas_numpy
