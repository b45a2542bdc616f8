"""Rotationally symmetric graphical mean curvature flow on a radial grid.

The radial equation

    u_t = u_rr / (1 + u_r^2) + (n - 1) u_r / r

is written as ``r^{1-n} (r^{n-1} arctan u_r)_r + (n - 1)/r * B(u_r)`` with
``B(q) = q - arctan q``.  The divergence part is differenced in finite-volume
form over the cells ``[r_i - h/2, r_i + h/2]``.  The B part, whose
coefficient B'(q) = q^2/(1+q^2) is nonnegative, is blended between the
upwind (forward) slope and the centered average.  The blend weight ``theta`` is chosen per node so that every update is monotone
for slopes up to ``slope_bound``; the default bound (infinity) gives the pure
upwind scheme, which is monotone for all data.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _mcf_kernels as K
from .csvio import write_columns


class SchemeError(ValueError):
    """Invalid scheme configuration (for example a non-monotone time step)."""


class StepError(RuntimeError):
    """Newton iteration failed; ``residual`` is the last max-norm residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class EvolutionError(RuntimeError):
    """A step failed inside :func:`evolve`; the partial trajectory is attached."""

    def __init__(self, message: str, trajectory: "Trajectory", cause: Exception):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes ``r_i = r_min + i*h``, ``i = 0..M``.

    With ``r_min = 0`` node 0 is the symmetry axis; otherwise the grid is an
    annulus whose inner node carries Dirichlet data.
    """

    R_max: float
    M: int
    r_min: float = 0.0

    def __post_init__(self):
        if self.M < 16:
            raise ValueError("M must be >= 16")
        if not (0 <= self.r_min < self.R_max):
            raise ValueError("need 0 <= r_min < R_max")

    @property
    def h(self) -> float:
        return (self.R_max - self.r_min) / self.M

    @property
    def r(self) -> np.ndarray:
        return self.r_min + self.h * np.arange(self.M + 1)

    @property
    def has_origin(self) -> bool:
        return self.r_min == 0.0


@dataclass(frozen=True)
class EvolutionState:
    grid: RadialGrid
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.grid.M + 1,):
            raise ValueError(f"u has shape {u.shape}, grid needs {(self.grid.M + 1,)}")
        if not np.all(np.isfinite(u)):
            raise ValueError("non-finite heights")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)


def _const(c: float) -> Callable[[float], float]:
    return lambda t: c


@dataclass(frozen=True)
class BoundarySpec:
    """Dirichlet traces; ``inner`` is only used on annular grids."""

    outer: Callable[[float], float]
    inner: Optional[Callable[[float], float]] = None

    @classmethod
    def constant(cls, outer: float, inner: float | None = None) -> "BoundarySpec":
        return cls(_const(float(outer)), None if inner is None else _const(float(inner)))

    def shifted(self, c: float) -> "BoundarySpec":
        o, i = self.outer, self.inner
        return BoundarySpec(lambda t: o(t) + c, None if i is None else (lambda t: i(t) + c))


@dataclass(frozen=True)
class SchemeConfig:
    mode: str = "explicit"
    cfl: float = 0.2
    dt: float = 1e-3
    newton_tol: float = 1e-12
    newton_max_iters: int = 30
    slope_bound: float = math.inf
    well_balanced: bool = False

    def __post_init__(self):
        if self.mode not in ("explicit", "implicit"):
            raise SchemeError(f"unknown mode {self.mode!r}")
        if not 0 < self.cfl <= 0.25:
            raise SchemeError("cfl must lie in (0, 0.25]")
        if not self.dt > 0:
            raise SchemeError("dt must be positive")
        if not self.newton_tol > 0:
            raise SchemeError("newton_tol must be positive")
        if not self.slope_bound >= 0:
            raise SchemeError("slope_bound must be nonnegative")


@dataclass(eq=False)
class RadialOperator:
    """Discrete right-hand side for a fixed grid, dimension and scheme.

    ``reference`` (heights of a translator sampled on the grid) switches on
    well-balancing: a constant per-node correction makes ``reference + t`` an
    exact discrete solution.
    """

    grid: RadialGrid
    n: int
    slope_bound: float = math.inf
    reference: Optional[np.ndarray] = None
    theta: np.ndarray = field(init=False)
    wp: np.ndarray = field(init=False)
    wm: np.ndarray = field(init=False)
    kp: np.ndarray = field(init=False)
    km: np.ndarray = field(init=False)
    corr: np.ndarray = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        n, g = int(self.n), self.grid
        r, h = g.r, g.h
        self.wp = np.zeros_like(r)
        self.wm = np.zeros_like(r)
        self.kp = np.zeros_like(r)
        self.km = np.zeros_like(r)
        self.theta = np.zeros_like(r)
        ri = r[1:-1]
        rp, rm = ri + 0.5 * h, ri - 0.5 * h
        # finite-volume measure of the cell; makes the divergence part exact on quadratics
        vol = (rp ** n - rm ** n) / (n * h)
        self.wp[1:-1] = rp ** (n - 1) / vol
        self.wm[1:-1] = rm ** (n - 1) / vol
        k = (n - 1) / ri
        Q = self.slope_bound
        if math.isinf(Q):
            th = np.zeros_like(ri)
        elif Q == 0:
            th = np.ones_like(ri)
        else:
            # largest centered share that keeps d rhs_i / d u_{i-1} >= 0 for |q| <= Q
            th = np.minimum(1.0, 2.0 * self.wm[1:-1] / (k * h * Q * Q))
        self.theta[1:-1] = th
        self.kp[1:-1] = k * (1.0 - 0.5 * th)
        self.km[1:-1] = k * 0.5 * th
        self.corr = np.zeros_like(r)
        if self.reference is not None:
            ref = np.asarray(self.reference, dtype=float)
            if ref.shape != r.shape:
                raise ValueError("reference does not match the grid")
            plain = self.rhs(ref)
            self.corr = 1.0 - plain
            self.corr[-1] = 0.0
            if not g.has_origin:
                self.corr[0] = 0.0

    def rhs(self, u: np.ndarray) -> np.ndarray:
        out = np.empty_like(u, dtype=float)
        K.rhs_kernel(np.ascontiguousarray(u, dtype=float), float(self.n), self.grid.h, self.wp, self.wm,
                     self.kp, self.km, self.corr, self.grid.has_origin, out)
        return out

    def jacobian(self, u: np.ndarray):
        N = u.size
        lower, diag, upper = np.empty(N), np.empty(N), np.empty(N)
        K.jacobian_kernel(np.ascontiguousarray(u, dtype=float), float(self.n), self.grid.h, self.wp, self.wm,
                          self.kp, self.km, self.grid.has_origin, lower, diag, upper)
        return lower, diag, upper

    def max_stable_ratio(self) -> float:
        """Largest dt/h^2 for which forward Euler is monotone for every slope."""
        h = self.grid.h
        r = self.grid.r
        c = np.zeros_like(r)
        c[1:-1] = (self.n - 1) * h / r[1:-1] * (1.0 - 0.5 * self.theta[1:-1])
        interior = np.maximum(self.wp[1:-1], c[1:-1]) + self.wm[1:-1]
        lim = float(1.0 / interior.max())
        if self.grid.has_origin:
            lim = min(lim, 1.0 / (2.0 * self.n))
        return lim


def radial_rhs(state: EvolutionState, n: int, slope_bound: float = math.inf) -> np.ndarray:
    """Semi-discrete velocity at every node (zero at Dirichlet nodes)."""
    return RadialOperator(state.grid, n, slope_bound).rhs(state.u)


def _operator(state_or_grid, n, scheme: SchemeConfig, reference=None) -> RadialOperator:
    grid = state_or_grid.grid if isinstance(state_or_grid, EvolutionState) else state_or_grid
    return RadialOperator(grid, n, scheme.slope_bound, reference if scheme.well_balanced else None)


def _check_bc(grid: RadialGrid, bc: BoundarySpec):
    if not grid.has_origin and bc.inner is None:
        raise SchemeError("annular grid needs inner Dirichlet data")


def explicit_dt(op: RadialOperator, scheme: SchemeConfig) -> float:
    ratio = op.max_stable_ratio()
    if scheme.cfl > ratio * (1 + 1e-12):
        raise SchemeError(f"cfl={scheme.cfl} exceeds the monotone limit {ratio:.6g} for n={op.n}")
    return scheme.cfl * op.grid.h ** 2


def step_explicit(state: EvolutionState, bc: BoundarySpec, dt: float, n: int,
                  scheme: SchemeConfig = SchemeConfig(), op: RadialOperator | None = None) -> EvolutionState:
    """One forward Euler step; refuses any dt beyond the monotone limit."""
    op = op or _operator(state, n, scheme)
    _check_bc(state.grid, bc)
    h2 = state.grid.h ** 2
    limit = min(scheme.cfl, op.max_stable_ratio()) * h2
    if not 0 < dt <= limit * (1 + 1e-12):
        raise SchemeError(f"dt={dt:.6g} exceeds the monotone limit {limit:.6g}")
    u = np.array(state.u)
    t1 = state.t + dt
    g_in = np.array([bc.inner(t1)]) if bc.inner is not None else np.zeros(1)
    K.advance_kernel(u, float(n), state.grid.h, op.wp, op.wm, op.kp, op.km, op.corr,
                     state.grid.has_origin, dt, np.array([bc.outer(t1)]), g_in, 1)
    return EvolutionState(state.grid, u, t1)


def step_implicit(state: EvolutionState, bc: BoundarySpec, dt: float, n: int,
                  newton_tol: float = 1e-12, newton_max_iters: int = 30,
                  scheme: SchemeConfig = SchemeConfig(mode="implicit"),
                  op: RadialOperator | None = None) -> EvolutionState:
    """Backward Euler, solved by damped Newton on the tridiagonal system."""
    if not dt > 0:
        raise SchemeError("dt must be positive")
    op = op or _operator(state, n, scheme)
    grid = state.grid
    _check_bc(grid, bc)
    t1 = state.t + dt
    u0 = np.asarray(state.u)
    v = u0.copy()
    v[-1] = bc.outer(t1)
    if not grid.has_origin:
        v[0] = bc.inner(t1)
    lo = 0 if grid.has_origin else 1

    def residual(w):
        F = w - u0 - dt * op.rhs(w)
        F[-1] = 0.0
        if lo:
            F[0] = 0.0
        return F

    F = residual(v)
    res = float(np.max(np.abs(F)))
    for _ in range(newton_max_iters):
        if res <= newton_tol:
            return EvolutionState(grid, v, t1)
        lower, diag, upper = op.jacobian(v)
        lower, diag, upper = -dt * lower, 1.0 - dt * diag, -dt * upper
        diag[-1], lower[-1] = 1.0, 0.0
        if lo:
            diag[0], upper[0] = 1.0, 0.0
        delta = K.tridiagonal_solve(lower, diag, upper, -F)
        lam = 1.0
        while True:
            trial = v + lam * delta
            F_trial = residual(trial)
            res_trial = float(np.max(np.abs(F_trial)))
            if res_trial < res or lam < 1e-4:
                break
            lam *= 0.5
        v, F, res = trial, F_trial, res_trial
    if res <= newton_tol:
        return EvolutionState(grid, v, t1)
    raise StepError(f"Newton did not converge in {newton_max_iters} iterations (residual {res:.3g})", res)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    requested: list = field(default_factory=list)
    states: list = field(default_factory=list)
    steps: int = 0

    def heights(self) -> np.ndarray:
        return np.array([s.u for s in self.states])


def evolve(initial: EvolutionState, bc: BoundarySpec, T: float, scheme: SchemeConfig, n: int,
           sample_times: Sequence[float] | None = None,
           observer: Callable[[EvolutionState, float], None] | None = None,
           reference: np.ndarray | None = None) -> Trajectory:
    """Step from ``initial.t`` to ``initial.t + T``.

    Each requested sample time is served by the first completed step at or
    after it.  ``observer(state, requested_time)`` is called for each sample.
    ``reference`` is used for well-balancing when the scheme asks for it.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    grid = initial.grid
    _check_bc(grid, bc)
    t0 = initial.t
    times = sorted(float(s) for s in (sample_times if sample_times is not None else [t0 + T]))
    times = [s for s in times if t0 <= s <= t0 + T + 1e-12] or [t0 + T]
    traj = Trajectory()

    def record(state, req):
        traj.times.append(state.t)
        traj.requested.append(req)
        traj.states.append(state)
        if observer is not None:
            observer(state, req)

    if T == 0:
        record(initial, t0)
        return traj
    op = _operator(initial, n, scheme, reference)
    state = initial
    pending = list(times)
    while pending and pending[0] <= t0 + 1e-15:
        record(state, pending.pop(0))

    if scheme.mode == "explicit":
        dt = explicit_dt(op, scheme)
        n_total = int(math.ceil(T / dt - 1e-9))
        k = 0
        u = np.array(initial.u)
        has_origin = grid.has_origin
        while pending:
            # steps until the first step time >= the next requested time
            k_next = min(n_total, max(k + 1, int(math.ceil((pending[0] - t0) / dt - 1e-9))))
            ks = np.arange(k + 1, k_next + 1)
            ts = t0 + ks * dt
            g_out = np.array([bc.outer(t) for t in ts])
            g_in = np.array([bc.inner(t) for t in ts]) if not has_origin else np.zeros(ks.size)
            try:
                K.advance_kernel(u, float(n), grid.h, op.wp, op.wm, op.kp, op.km, op.corr,
                                 has_origin, dt, g_out, g_in, ks.size)
                if not np.all(np.isfinite(u)):
                    raise FloatingPointError("non-finite heights")
            except Exception as exc:
                raise EvolutionError(f"explicit stepping failed near t={ts[-1]:.6g}", traj, exc) from exc
            k = k_next
            traj.steps = k
            state = EvolutionState(grid, u.copy(), t0 + k * dt)
            while pending and pending[0] <= state.t + 1e-12:
                record(state, pending.pop(0))
            if k >= n_total and pending:
                for req in pending:
                    record(state, req)
                pending = []
    else:
        dt = scheme.dt
        n_total = int(math.ceil(T / dt - 1e-9))
        for k in range(1, n_total + 1):
            try:
                state = step_implicit(state, bc, dt, n, scheme.newton_tol, scheme.newton_max_iters, scheme, op)
            except StepError as exc:
                raise EvolutionError(f"implicit step {k} failed: {exc}", traj, exc) from exc
            state = EvolutionState(grid, state.u, t0 + k * dt)
            traj.steps = k
            while pending and pending[0] <= state.t + 1e-12:
                record(state, pending.pop(0))
        for req in pending:
            record(state, req)
    return traj


def write_trajectory(traj: Trajectory, directory, prefix: str = "state") -> str:
    """One ``r,u`` CSV per sample plus a manifest listing times and files."""
    os.makedirs(directory, exist_ok=True)
    lines = ["# index requested_time step_time file"]
    for i, (req, st) in enumerate(zip(traj.requested, traj.states)):
        name = f"{prefix}_{i:05d}.csv"
        write_columns(os.path.join(directory, name), ("r", "u"), (st.grid.r, st.u))
        lines.append(f"{i} {req:.17g} {st.t:.17g} {name}")
    path = os.path.join(directory, f"{prefix}_manifest.txt")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
