"""Adaptive Dormand-Prince 5(4) integrator for the small ODE systems used here.

The right-hand sides are selected by an integer ``kind`` so that the whole
stepping loop can be compiled by numba:

* ``KIND_PHI``       phi' = (1 + phi^2)(1 - (n-1) phi / r)             params = [n]
* ``KIND_NECK``      h'' = ((n-1)/h - s h')(1 + h'^2), y = (h, h')      params = [n, s]
* ``KIND_DEVIATION`` phi = S(r) + d with S a truncated tail series;
                     d' = F(S + d) - F(S) + Res(r)                       params packed
                     by :func:`pack_deviation_params`

Error control is per unit step: a step of size H is accepted when
``|err_i| <= H * (atol + rtol * |y_i|)`` for every component.
"""
from __future__ import annotations

import numpy as np

from ._accel import maybe_njit

KIND_PHI = 0
KIND_NECK = 1
KIND_DEVIATION = 2

STATUS_OK = 0
STATUS_EVENT = 1
STATUS_BLOWUP = 2
STATUS_MAX_STEPS = 3
STATUS_COLLAPSE = 4

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@maybe_njit
def _poly_inv(x, coeffs, top):
    # sum_j coeffs[j] * r**(top - j) with x = 1/r, top <= 0
    acc = 0.0
    for j in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * x + coeffs[j]
    return acc * x ** (-top)


@maybe_njit
def rhs(kind, params, t, y, out):
    if kind == KIND_PHI:
        n = params[0]
        p = y[0]
        out[0] = (1.0 + p * p) * (1.0 - (n - 1.0) * p / t)
    elif kind == KIND_NECK:
        n = params[0]
        s = params[1]
        h = y[0]
        hp = y[1]
        out[0] = hp
        out[1] = ((n - 1.0) / h - s * hp) * (1.0 + hp * hp)
    else:
        n = params[0]
        m = int(params[1])
        x = 1.0 / t
        x2 = x * x
        # tail part T = S - r/(n-1), a sum of odd negative powers
        acc = 0.0
        for j in range(m - 1, -1, -1):
            acc = acc * x2 + params[2 + j]
        T = acc * x
        S = t / (n - 1.0) + T
        top = params[2 + m]
        L = int(params[3 + m])
        res = _poly_inv(x, params[4 + m:4 + m + L], top)
        d = y[0]
        A = -(n - 1.0) * T * x
        k = (n - 1.0) * x
        q = 2.0 * S * d + d * d
        out[0] = q * A - k * d * (1.0 + S * S) - k * d * q + res


@maybe_njit
def _step(kind, params, t, y, H, K, ynew, err, tmp):
    d = y.shape[0]
    for s in range(1, 7):
        for i in range(d):
            acc = y[i]
            for j in range(s):
                acc += H * _A[s, j] * K[j, i]
            tmp[i] = acc
        rhs(kind, params, t + _C[s] * H, tmp, K[s])
    for i in range(d):
        acc = y[i]
        e = 0.0
        for j in range(7):
            acc += H * _B[j] * K[j, i]
            e += H * _E[j] * K[j, i]
        ynew[i] = acc
        err[i] = e


@maybe_njit
def _event_value(y, ev_a, ev_b):
    # |h'| - min(ev_a, ev_b / h)
    lim = ev_a
    if ev_b > 0.0 and ev_b / y[0] < lim:
        lim = ev_b / y[0]
    return abs(y[1]) - lim


@maybe_njit
def integrate(kind, params, t0, y0, t_out, rtol, atol, h_init, h_max, max_steps,
              use_event, ev_a, ev_b):
    """Integrate from ``t0`` through every point of increasing ``t_out``.

    Returns ``(status, y_out, n_out, steps_t, steps_y, n_steps, t_end, y_end)``.
    With ``use_event`` the run stops at the first root of the neck switch
    function; ``t_out`` then only bounds the range.
    """
    d = y0.shape[0]
    n_out_total = t_out.shape[0]
    y_out = np.empty((n_out_total, d))
    steps_t = np.empty(max_steps + 1)
    steps_y = np.empty((max_steps + 1, d))
    K = np.empty((7, d))
    ynew = np.empty(d)
    err = np.empty(d)
    tmp = np.empty(d)
    y = y0.copy()
    t = t0
    steps_t[0] = t
    steps_y[0] = y
    n_steps = 0
    n_out = 0
    while n_out < n_out_total and t_out[n_out] <= t:
        y_out[n_out] = y
        n_out += 1
    rhs(kind, params, t, y, K[0])
    H = h_init
    status = STATUS_OK
    t_final = t_out[n_out_total - 1]
    g_old = 0.0
    if use_event:
        g_old = _event_value(y, ev_a, ev_b)
    while t < t_final:
        if n_steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if H > h_max:
            H = h_max
        H_prop = H
        target = t_out[n_out] if n_out < n_out_total else t_final
        hit = False
        if t + H >= target:
            H = target - t
            hit = True
        _step(kind, params, t, y, H, K, ynew, err, tmp)
        ratio = 0.0
        finite = True
        for i in range(d):
            if not np.isfinite(ynew[i]) or not np.isfinite(err[i]):
                finite = False
            sc = H * (atol + rtol * max(abs(y[i]), abs(ynew[i])))
            v = abs(err[i]) / sc
            if v > ratio:
                ratio = v
        if not finite:
            if H < 1e-14 * max(1.0, abs(t)):
                status = STATUS_BLOWUP
                break
            H *= 0.25
            continue
        if ratio <= 1.0:
            if kind == KIND_NECK and ynew[0] <= 0.0:
                status = STATUS_COLLAPSE
                break
            if use_event:
                g_new = _event_value(ynew, ev_a, ev_b)
                if g_old < 0.0 and g_new >= 0.0:
                    # bisect the step length for the root of the switch function
                    lo = 0.0
                    hi = H
                    for _ in range(200):
                        mid = 0.5 * (lo + hi)
                        _step(kind, params, t, y, mid, K, ynew, err, tmp)
                        if _event_value(ynew, ev_a, ev_b) >= 0.0:
                            hi = mid
                        else:
                            lo = mid
                        if hi - lo <= 1e-15 * max(1.0, abs(t)):
                            break
                    _step(kind, params, t, y, hi, K, ynew, err, tmp)
                    t = t + hi
                    for i in range(d):
                        y[i] = ynew[i]
                    n_steps += 1
                    steps_t[n_steps] = t
                    steps_y[n_steps] = y
                    status = STATUS_EVENT
                    break
                g_old = g_new
            if hit:
                t = target
            else:
                t = t + H
            for i in range(d):
                y[i] = ynew[i]
            n_steps += 1
            steps_t[n_steps] = t
            steps_y[n_steps] = y
            rhs(kind, params, t, y, K[0])
            while n_out < n_out_total and t_out[n_out] <= t:
                y_out[n_out] = y
                n_out += 1
        if ratio == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * ratio ** (-0.25)
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
        if ratio > 1.0 and fac > 0.9:
            fac = 0.9
        if hit and ratio <= 1.0:
            # a clipped landing step says nothing about the natural step size
            H = H_prop
        else:
            H = H * fac
    return status, y_out, n_out, steps_t[:n_steps + 1], steps_y[:n_steps + 1], n_steps, t, y


def pack_deviation_params(n: float, tail: np.ndarray, res_top: int, res_coeffs: np.ndarray) -> np.ndarray:
    return np.concatenate([[float(n), float(len(tail))], tail, [float(res_top), float(len(res_coeffs))], res_coeffs])
