"""Radial translator profiles: the slope ODE, the bowl, heights and residuals.

A rotationally symmetric graph ``V(r) + t`` translates with unit speed under
mean curvature flow iff

    1 = V'' / (1 + V'^2) + (n - 1) V' / r,

equivalently ``phi = V'`` solves ``phi' = (1 + phi^2)(1 - (n-1) phi / r)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import rk
from .csvio import write_columns
from .series import (
    MAX_ORDER,
    OriginSeries,
    eval_series,
    expand_origin,
    expand_tail,
    residual_float_coefficients,
    tail_float_coefficients,
)


class IntegrationBlowup(FloatingPointError):
    """Non-finite value while integrating outward in r."""


class ConfigurationError(ValueError):
    """Parameters that cannot produce a resolved profile."""


DEFAULT_GRID_STEP = 0.01


@dataclass(frozen=True, eq=False)
class PhiProfile:
    """Sampled slope ``phi(r)`` of a radial translator.

    ``r``/``phi`` hold every accepted integrator step; ``grid_r``/``grid_phi``/
    ``grid_dphi`` are the resampled values on the (nearly) uniform grid used by
    downstream consumers.
    """

    n: int
    r: np.ndarray
    phi: np.ndarray
    tol: float
    origin_regular: bool
    grid_r: np.ndarray
    grid_phi: np.ndarray
    grid_dphi: np.ndarray
    origin: Optional[OriginSeries] = None
    r_start: float = 0.0
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.grid_r, self.grid_phi, self.grid_dphi))

    @classmethod
    def from_samples(cls, n: int, r, phi, dphi=None, tol: float = 0.0) -> "PhiProfile":
        """Wrap arbitrary samples (synthetic profiles, tests)."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if dphi is None:
            dphi = np.gradient(phi, r, edge_order=2)
        return cls(n, r, phi, tol, False, r, phi, np.asarray(dphi, dtype=float))

    @property
    def samples(self):
        return list(zip(self.r.tolist(), self.phi.tolist()))

    @property
    def r_min(self) -> float:
        return float(self.grid_r[0])

    @property
    def r_max(self) -> float:
        return float(self.grid_r[-1])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self._spline(r)
        if self.origin is not None:
            small = r < self.r_start
            if np.any(small):
                out = np.where(small, eval_series(self.origin, np.where(small, r, 0.0)), out)
        return out if out.ndim else float(out)

    def check_invariants(self) -> list[str]:
        """Return a list of violated invariants (empty when all hold)."""
        problems = []
        if not np.all(np.diff(self.r) > 0) or not np.all(np.diff(self.grid_r) > 0):
            problems.append("radii not strictly increasing")
        if not (np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.grid_phi))):
            problems.append("non-finite samples")
        lo = self.r[0] + 0.9 * (self.r[-1] - self.r[0])
        tail = self.r >= lo
        if np.any(self.phi[tail] > self.r[tail] / (self.n - 1)):
            problems.append("phi above r/(n-1) on the final 10% of the range")
        if self.origin_regular:
            pos = self.grid_r > 0
            if np.any(self.grid_phi[pos] <= 0):
                problems.append("bowl slope not positive")
            if np.any(np.diff(self.grid_phi) <= 0):
                problems.append("bowl slope not strictly increasing")
        return problems


@dataclass(frozen=True, eq=False)
class HeightProfile:
    """Heights ``u(r)`` of a radial translator, pinned at ``anchor``."""

    n: int
    r: np.ndarray
    u: np.ndarray
    slope: np.ndarray
    anchor: tuple[float, float]
    is_bowl: bool = False
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.r, self.u, self.slope))

    @property
    def samples(self):
        return list(zip(self.r.tolist(), self.u.tolist()))

    def __call__(self, r):
        out = self._spline(np.asarray(r, dtype=float))
        return out if out.ndim else float(out)

    def derivative(self, r):
        out = self._spline(np.asarray(r, dtype=float), 1)
        return out if out.ndim else float(out)

    def shifted(self, c: float) -> "HeightProfile":
        return HeightProfile(self.n, self.r, self.u + c, self.slope, (self.anchor[0], self.anchor[1] + c), self.is_bowl)


def _check_n(n):
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    return int(n)


def _output_grid(r0: float, r1: float, step: float) -> np.ndarray:
    k0 = math.floor(r0 / step) + 1
    k1 = math.ceil(r1 / step) - 1
    inner = np.arange(k0, k1 + 1) * step if k1 >= k0 else np.empty(0)
    inner = inner[(inner - r0 > 0.5 * step) & (r1 - inner > 0.5 * step)]
    return np.concatenate([[r0], inner, [r1]])


def _phi_rhs(n, r, phi):
    return (1.0 + phi * phi) * (1.0 - (n - 1.0) * phi / r)


def _run_phi(n, r0, phi0, grid, tol):
    params = np.array([float(n)])
    max_steps = 20 * grid.size + 200_000
    h0 = min(1e-3 * max(r0, 1e-3), grid[1] - grid[0] if grid.size > 1 else 1e-3)
    status, y_out, n_out, st, sy, _, t_end, _ = rk.integrate(
        rk.KIND_PHI, params, float(r0), np.array([float(phi0)]), grid, tol, tol,
        h0, np.inf, max_steps, False, 0.0, 0.0)
    if status == rk.STATUS_BLOWUP:
        raise IntegrationBlowup(f"phi blew up near r = {t_end:.6g}")
    if status != rk.STATUS_OK or n_out != grid.size:
        raise IntegrationBlowup(f"integration stopped early at r = {t_end:.6g} (status {status})")
    return y_out[:, 0], st, sy[:, 0]


def integrate_phi(n: int, R: float, phi0: float, r_max: float, tol: float,
                  grid_step: float = DEFAULT_GRID_STEP) -> PhiProfile:
    """Solve the slope ODE outward from ``phi(R) = phi0`` to ``r_max``."""
    n = _check_n(n)
    if not (R > 0 and math.isfinite(R)):
        raise ValueError("R must be positive")
    if not (r_max / R >= 2):
        raise ValueError("need r_max / R >= 2")
    if not (0 < tol <= 1e-3):
        raise ValueError("tol must lie in (0, 1e-3]")
    if not math.isfinite(phi0):
        raise ValueError("phi0 must be finite")
    grid = _output_grid(float(R), float(r_max), grid_step)
    gphi, st, sphi = _run_phi(n, R, phi0, grid, tol)
    return PhiProfile(n, st, sphi, tol, False, grid, gphi, _phi_rhs(n, grid, gphi))


def _origin_start(n: int, r_start: float, tol: float) -> OriginSeries:
    s = expand_origin(n, MAX_ORDER)
    for order in range(1, MAX_ORDER - 1, 2):
        nxt = abs(float(s.coefficients[order + 2])) * r_start ** (order + 2)
        if nxt <= 1e-3 * tol:
            return OriginSeries(s.n, order, {k: c for k, c in s.coefficients.items() if k <= order})
    raise ConfigurationError(f"origin series does not resolve tol={tol} at r_start={r_start}")


def bowl_phi(n: int, r_max: float, tol: float, grid_step: float = DEFAULT_GRID_STEP,
             r_start: float | None = None) -> PhiProfile:
    """Slope of the entire convex translator, started from the regular series."""
    n = _check_n(n)
    if r_max < 10:
        raise ValueError("r_max must be >= 10")
    if not (0 < tol <= 1e-3):
        raise ValueError("tol must lie in (0, 1e-3]")
    r_start = 1e-3 * n if r_start is None else r_start
    if not (0 < r_start < min(grid_step, 0.5)):
        raise ConfigurationError("r_start must be positive and below the first grid node")
    origin = _origin_start(n, r_start, tol)
    k_end = math.ceil(r_max / grid_step - 1e-9)
    grid = np.arange(k_end + 1) * grid_step
    grid[-1] = r_max
    head = grid[grid < r_start]
    tail = grid[grid >= r_start]
    phi_start = eval_series(origin, r_start)
    gphi_tail, st, sphi = _run_phi(n, r_start, phi_start, np.concatenate([[r_start], tail]), tol)
    gphi = np.concatenate([eval_series(origin, head), gphi_tail[1:]])
    dphi = np.empty_like(gphi)
    pos = grid > 0
    dphi[pos] = _phi_rhs(n, grid[pos], gphi[pos])
    dphi[~pos] = 1.0 / n
    return PhiProfile(n, st, sphi, tol, True, grid, gphi, dphi, origin, r_start)


def height_from_phi(p: PhiProfile, anchor: tuple[float, float]) -> HeightProfile:
    """Cumulative quadrature ``u(r) = u0 + int_{r0}^{r} phi``.

    Uses the endpoint-corrected trapezoid rule (exact for cubics) on the
    profile grid, so the integration error is smooth from node to node.
    """
    r0, u0 = float(anchor[0]), float(anchor[1])
    r, phi, dphi = p.grid_r, p.grid_phi, p.grid_dphi
    if not (r[0] - 1e-12 <= r0 <= r[-1] + 1e-12):
        raise ValueError(f"anchor radius {r0} outside [{r[0]}, {r[-1]}]")
    j = int(np.argmin(np.abs(r - r0)))
    if abs(r[j] - r0) > 1e-12 * max(1.0, abs(r0)):
        k = int(np.searchsorted(r, r0))
        pr = float(p(r0))
        r = np.insert(r, k, r0)
        phi = np.insert(phi, k, pr)
        dphi = np.insert(dphi, k, float(p._spline(r0, 1)))
        j = k
    h = np.diff(r)
    pieces = 0.5 * h * (phi[:-1] + phi[1:]) + h * h / 12.0 * (dphi[:-1] - dphi[1:])
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    u = u0 + (cum - cum[j])
    u[j] = u0
    return HeightProfile(p.n, r, u, phi, (r0, u0), p.origin_regular)


def bowl_height(n: int, r_max: float, tol: float = 1e-11, grid_step: float = DEFAULT_GRID_STEP) -> HeightProfile:
    """Bowl heights normalised by ``U(0) = 0``."""
    return height_from_phi(bowl_phi(n, r_max, tol, grid_step), (0.0, 0.0))


def _fd_weights(x0: float, xs: np.ndarray, m: int) -> np.ndarray:
    """Fornberg finite-difference weights for derivatives 0..m at x0."""
    N = len(xs)
    c = np.zeros((N, m + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, N):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def finite_differences(r: np.ndarray, u: np.ndarray, symmetric_origin: bool = False):
    """Second-order first and second derivatives on a possibly graded grid."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.size < 5:
        raise ValueError("need at least 5 samples")
    h1 = r[1:-1] - r[:-2]
    h2 = r[2:] - r[1:-1]
    d1 = np.empty_like(u)
    d2 = np.empty_like(u)
    du0 = u[1:-1] - u[:-2]
    du1 = u[2:] - u[1:-1]
    # written in differences so constants give exactly zero
    d1[1:-1] = (h1 / (h2 * (h1 + h2))) * du1 + (h2 / (h1 * (h1 + h2))) * du0
    d2[1:-1] = 2.0 * (du1 / h2 - du0 / h1) / (h1 + h2)
    # where the spacing jumps the 3-point u'' is only first order; widen the stencil
    jump = np.nonzero(np.abs(h2 - h1) > 1e-6 * np.minimum(h1, h2))[0] + 1
    for i in jump:
        lo = min(max(i - 2, 0), r.size - 5)
        nodes = slice(lo, lo + 5)
        w = _fd_weights(r[i], r[nodes], 2)
        d1[i] = w[:, 1] @ (u[nodes] - u[i])
        d2[i] = w[:, 2] @ (u[nodes] - u[i])
    for idx, nodes in ((0, slice(0, 5)), (-1, slice(-5, None))):
        w = _fd_weights(r[idx], r[nodes], 2)
        d1[idx] = w[:, 1] @ (u[nodes] - u[idx])
        d2[idx] = w[:, 2] @ (u[nodes] - u[idx])
    if symmetric_origin and r[0] == 0.0:
        d1[0] = 0.0
        d2[0] = 2.0 * (u[1] - u[0]) / r[1] ** 2
    return d1, d2


def translator_residual(h: HeightProfile) -> np.ndarray:
    """``1 - [V''/(1+V'^2) + (n-1) V'/r]`` at every sample, by finite differences."""
    r, u = h.r, h.u
    origin = bool(r[0] == 0.0)
    d1, d2 = finite_differences(r, u, symmetric_origin=origin)
    rho = np.empty_like(u)
    pos = r > 0
    rho[pos] = 1.0 - (d2[pos] / (1.0 + d1[pos] ** 2) + (h.n - 1) * d1[pos] / r[pos])
    # at r = 0 the drift term tends to (n-1) V''(0)
    rho[~pos] = 1.0 - h.n * d2[~pos]
    return rho


def integrate_phi_deviation(n: int, R: float, phi0: float, r_handoff: float, r_eval,
                            tol: float = 1e-12, order: int = 9) -> np.ndarray:
    """``phi(r) - S(r)`` with ``S`` the order-``order`` tail series.

    ``phi`` is integrated in plain form up to ``r_handoff`` and then in the
    remainder variable ``d = phi - S``, whose equation carries the exact
    residual of the truncated series as forcing.  This keeps relative accuracy
    on ``d`` even when ``|d|`` is far below the rounding level of ``phi``.
    """
    n = _check_n(n)
    r_eval = np.asarray(r_eval, dtype=float)
    if not (R < r_handoff < r_eval[0]):
        raise ValueError("need R < r_handoff < r_eval[0]")
    head = integrate_phi(n, R, phi0, r_handoff, min(tol, 1e-3), grid_step=max((r_handoff - R) / 200, 1e-3))
    series = expand_tail(n, order)
    d0 = head.grid_phi[-1] - eval_series(series, r_handoff)
    top, res = residual_float_coefficients(series)
    # the series residual is S' - F(S); the remainder equation needs F(S) - S'
    params = rk.pack_deviation_params(n, tail_float_coefficients(series), top, -res)
    grid = np.concatenate([[r_handoff], r_eval])
    status, y_out, n_out, *_ = rk.integrate(
        rk.KIND_DEVIATION, params, float(r_handoff), np.array([d0]), grid, tol, 1e-300,
        1e-3, np.inf, 50 * grid.size + 500_000, False, 0.0, 0.0)
    if status != rk.STATUS_OK or n_out != grid.size:
        raise IntegrationBlowup(f"remainder integration failed (status {status})")
    return y_out[1:, 0]


def write_phi_csv(p: PhiProfile, path, resampled: bool = False) -> str:
    r, phi = (p.grid_r, p.grid_phi) if resampled else (p.r, p.phi)
    return write_columns(path, ("r", "phi"), (r, phi))


def write_height_csv(h: HeightProfile, path) -> str:
    return write_columns(path, ("r", "u"), (h.r, h.u))
