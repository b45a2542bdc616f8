"""Desk-scale stability experiments built on the profiles, wings and evolver."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .csvio import write_columns
from .evolver import (
    BoundarySpec,
    EvolutionState,
    RadialGrid,
    RadialOperator,
    SchemeConfig,
    Trajectory,
    evolve,
)
from .profiles import bowl_height
from .wings import WingPair, build_wing_pair, calibrate_shifts


class ExperimentConfigError(ValueError):
    """Experiment parameters that violate the setup's hypotheses."""


@dataclass(frozen=True)
class PerturbationSpec:
    """``a (1 - (r/rho)^2)^3`` on ``r < rho`` (compact bump) or ``a (1 + r)^-p``."""

    kind: str = "compact-bump"
    amplitude: float = 1.0
    rho: float = 3.0
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in ("compact-bump", "slow-decay"):
            raise ExperimentConfigError(f"unknown perturbation kind {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ExperimentConfigError("amplitude must be finite")
        if self.kind == "compact-bump" and not self.rho > 0:
            raise ExperimentConfigError("rho must be positive")
        if self.kind == "slow-decay" and not self.p > 0:
            raise ExperimentConfigError("decay exponent p must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "compact-bump":
            s = np.clip(1.0 - (r / self.rho) ** 2, 0.0, None)
            out = self.amplitude * s ** 3
        else:
            out = self.amplitude * (1.0 + r) ** (-self.p)
        return out if out.ndim else float(out)

    def radius_above(self, level: float) -> float:
        """Smallest R0 with ``|pert(r)| <= level`` for every r > R0."""
        a = abs(self.amplitude)
        if a <= level:
            return 0.0
        if self.kind == "compact-bump":
            return self.rho * math.sqrt(1.0 - (level / a) ** (1.0 / 3.0))
        return (a / level) ** (1.0 / self.p) - 1.0


@dataclass
class StabilityReport:
    times: np.ndarray
    sup_dev: np.ndarray
    omega_count: np.ndarray
    barrier_violation: np.ndarray
    epsilon: float
    h: float
    T_star: Optional[float] = None
    params: dict = field(default_factory=dict)

    @property
    def barrier_violation_max(self) -> float:
        return float(np.max(self.barrier_violation))

    @property
    def argmax_time(self) -> float:
        return float(self.times[int(np.argmax(self.sup_dev))])

    def nonincreasing_after_max(self, slack: float = 1e-12) -> bool:
        k = int(np.argmax(self.sup_dev))
        return bool(np.all(np.diff(self.sup_dev[k:]) <= slack))

    def omega_clear_after_t_star(self) -> bool:
        if self.T_star is None:
            return False
        return bool(np.all(self.omega_count[self.times >= self.T_star] == 0))

    def write(self, directory, stem: str = "report") -> tuple[str, str]:
        os.makedirs(directory, exist_ok=True)
        csv = os.path.join(directory, f"{stem}.csv")
        write_columns(csv, ("t", "sup_dev", "omega_count", "barrier_violation"),
                      (self.times, self.sup_dev, self.omega_count, self.barrier_violation))
        t_star = "none" if self.T_star is None else format(self.T_star, ".17g")
        with open(csv, "a", encoding="ascii") as fh:
            fh.write(f"# T_star={t_star} barrier_violation_max={self.barrier_violation_max:.17g}\n")
        manifest = os.path.join(directory, f"{stem}_manifest.txt")
        with open(manifest, "w", encoding="ascii") as fh:
            for key in sorted(self.params):
                fh.write(f"{key} = {self.params[key]}\n")
            fh.write(f"report = {os.path.basename(csv)}\nT_star = {t_star}\n")
        return csv, manifest


def _default_scheme(n: int) -> SchemeConfig:
    return SchemeConfig(mode="explicit", cfl=min(0.25, 1.0 / (2 * n)), well_balanced=True)


def _sample_times(T: float, sample_dt: float) -> np.ndarray:
    k = int(math.floor(T / sample_dt + 1e-9))
    return np.append(np.arange(k + 1) * sample_dt, T) if k * sample_dt < T - 1e-12 else np.arange(k + 1) * sample_dt


def _first_at_or_below(times, values, level) -> Optional[float]:
    hit = np.nonzero(np.asarray(values) <= level)[0]
    return float(times[hit[0]]) if hit.size else None


def _bowl_on_grid(n: int, grid: RadialGrid, tol: float):
    h = grid.h
    step = h / math.ceil(h / 0.005 - 1e-9)
    bowl = bowl_height(n, max(10.0, grid.R_max + h), tol, step)
    return bowl, bowl(grid.r)


def wing_barriers(pair: WingPair, r: np.ndarray, R_wing: float):
    """Static barrier heights on the nodes where the comparison applies."""
    lo = max(2.0 * R_wing, pair.w_plus.r[0], pair.w_minus.r[0])
    mask = (r > lo) & (r <= min(pair.w_plus.r[-1], pair.w_minus.r[-1]))
    return mask, pair.w_minus(r[mask]), pair.w_plus(r[mask])


def check_barrier_ordering(traj: Trajectory, pair: WingPair, R_wing: float) -> float:
    """Worst signed violation of ``W- + t <= u <= W+ + t`` on ``r > 2 R_wing``."""
    if not traj.states:
        return -math.inf
    r = traj.states[0].grid.r
    mask, wm, wp = wing_barriers(pair, r, R_wing)
    worst = -math.inf
    for st in traj.states:
        u = st.u[mask]
        worst = max(worst, float(np.max(np.maximum(wm + st.t - u, u - wp - st.t))))
    return worst


def run_soliton_stability(n: int, pert: PerturbationSpec, epsilon: float = 0.05, R_wing: float = 5.0,
                          grid: RadialGrid | None = None, scheme: SchemeConfig | None = None,
                          T: float = 40.0, sample_dt: float = 0.1, tol: float = 1e-11,
                          keep_trajectory: bool = False):
    """Evolve ``U + pert`` and track its deviation from the translating bowl.

    Returns a :class:`StabilityReport`, plus the trajectory and wing pair when
    ``keep_trajectory`` is set.
    """
    grid = grid or RadialGrid(60.0, 600)
    scheme = scheme or _default_scheme(n)
    if not epsilon > 0:
        raise ExperimentConfigError("epsilon must be positive")
    R0 = pert.radius_above(epsilon)
    if not R0 < grid.R_max / 2:
        raise ExperimentConfigError(f"perturbation exceeds epsilon up to r={R0:.4g}, need < R_max/2")
    if not R0 <= 2 * R_wing:
        raise ExperimentConfigError(f"perturbation exceeds epsilon up to r={R0:.4g}, beyond 2*R_wing")
    if not grid.has_origin:
        raise ExperimentConfigError("stability runs need a grid through the origin")

    bowl, U = _bowl_on_grid(n, grid, tol)
    r_wing_max = max(grid.R_max + grid.h, 20.0 * max(R_wing, n - 1))
    pair = calibrate_shifts(build_wing_pair(n, R_wing, r_wing_max, tol=tol, grid_step=0.005), bowl_height(
        n, r_wing_max, tol, 0.005), epsilon)
    r = grid.r
    u0 = U + pert(r)
    U_out = float(U[-1])
    R_max = grid.R_max

    def outer(t, _n=n):
        # the perturbation's boundary value travels out along r^2 = R_max^2 + 2(n-1)t
        return U_out + t + float(pert(math.sqrt(R_max * R_max + 2.0 * (_n - 1) * t)))

    bc = BoundarySpec(outer)
    mask, wm, wp = wing_barriers(pair, r, R_wing)
    times, sup, omega, viol = [], [], [], []

    def observe(state, _req):
        w = state.u - U - state.t
        times.append(state.t)
        sup.append(float(np.max(np.abs(w))))
        omega.append(int(np.count_nonzero(np.abs(w) > 2 * epsilon)))
        u = state.u[mask]
        viol.append(float(np.max(np.maximum(wm + state.t - u, u - wp - state.t))) if mask.any() else -math.inf)

    traj = evolve(EvolutionState(grid, u0), bc, T, scheme, n, _sample_times(T, sample_dt), observe, reference=U)
    times_a = np.array(times)
    sup_a = np.array(sup)
    report = StabilityReport(
        times_a, sup_a, np.array(omega), np.array(viol), epsilon, grid.h,
        _first_at_or_below(times_a, sup_a, 2 * epsilon),
        dict(experiment="soliton", n=n, epsilon=epsilon, R_wing=R_wing, R_max=grid.R_max, M=grid.M,
             perturbation=pert.kind, amplitude=pert.amplitude, rho=pert.rho, p=pert.p, T=T,
             sample_dt=sample_dt, mode=scheme.mode, cfl=scheme.cfl, dt=scheme.dt,
             well_balanced=scheme.well_balanced, slope_bound=scheme.slope_bound, tol=tol,
             C_plus=repr(pair.C_plus), C_minus=repr(pair.C_minus)))
    if keep_trajectory:
        return report, traj, pair
    return report


def catenoid_slope(r, n: int, c: float):
    r = np.asarray(r, dtype=float)
    x = c * r ** (-(n - 1))
    return x / np.sqrt(1.0 - x * x)


def catenoid_tail_height(r: float, n: int, c: float) -> float:
    """``f_inf - f(r) = int_r^inf f'`` for the catenoid slope (finite for n >= 3)."""
    # substitute s = r0/x so the vertical tangent at r0 becomes integrable smoothly
    r0 = c ** (1.0 / (n - 1))
    if r < r0:
        raise ValueError("radius inside the catenoid neck")
    val, _ = quad(lambda s: float(catenoid_slope(r0 / s, n, c)) * r0 / (s * s), 0.0, r0 / r,
                  epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def catenoid_static_residual(r, n: int, c: float):
    """``f''/(1+f'^2) + (n-1) f'/r`` with f'' from the closed form."""
    r = np.asarray(r, dtype=float)
    x = c * r ** (-(n - 1))
    fp = x / np.sqrt(1.0 - x * x)
    dx = -(n - 1) * x / r
    fpp = dx / (1.0 - x * x) ** 1.5
    return fpp / (1.0 + fp * fp) + (n - 1) * fp / r


def run_plane_stability(n: int, pert: PerturbationSpec, catenoid_c: float | None = None, epsilon: float = 0.05,
                        grid: RadialGrid | None = None, scheme: SchemeConfig | None = None,
                        T: float = 20.0, sample_dt: float = 0.1) -> StabilityReport:
    """Evolve ``pert`` toward the plane ``u = 0`` between catenoid barriers."""
    if int(n) != n or n < 3:
        raise ExperimentConfigError("plane stability needs n >= 3 (catenoid ends are not planar for n = 2)")
    n = int(n)
    grid = grid or RadialGrid(30.0, 300)
    scheme = scheme or SchemeConfig(cfl=min(0.25, 1.0 / (2 * n)))
    if pert.kind == "compact-bump":
        c = pert.rho ** (n - 1) if catenoid_c is None else catenoid_c
    else:
        if catenoid_c is None:
            raise ExperimentConfigError("slow-decay data need an explicit catenoid_c")
        c = catenoid_c
    if not c > 0:
        raise ExperimentConfigError("catenoid parameter must be positive")
    r0 = c ** (1.0 / (n - 1))
    r = grid.r
    mask = r > r0
    barrier = np.array([epsilon + catenoid_tail_height(x, n, c) for x in r[mask]])
    u0 = pert(r)
    if np.any(np.abs(u0[mask]) > barrier):
        raise ExperimentConfigError("initial data not between the catenoid barriers")
    g_out = float(pert(grid.R_max))
    bc = BoundarySpec.constant(g_out)
    times, sup, omega, viol = [], [], [], []

    def observe(state, _req):
        u = state.u
        times.append(state.t)
        sup.append(float(np.max(np.abs(u))))
        omega.append(int(np.count_nonzero(np.abs(u) > 2 * epsilon)))
        viol.append(float(np.max(np.abs(u[mask]) - barrier)) if mask.any() else -math.inf)

    evolve(EvolutionState(grid, u0), bc, T, scheme, n, _sample_times(T, sample_dt), observe)
    times_a, sup_a = np.array(times), np.array(sup)
    return StabilityReport(
        times_a, sup_a, np.array(omega), np.array(viol), epsilon, grid.h,
        _first_at_or_below(times_a, sup_a, 2 * epsilon),
        dict(experiment="plane", n=n, epsilon=epsilon, catenoid_c=c, R_max=grid.R_max, M=grid.M,
             perturbation=pert.kind, amplitude=pert.amplitude, rho=pert.rho, p=pert.p, T=T,
             sample_dt=sample_dt, mode=scheme.mode, cfl=scheme.cfl, dt=scheme.dt))


def comparison_sphere(C: float, n: int, tau: float, r: float) -> tuple[float, float]:
    """(center height, initial radius) of the axis-centered comparison sphere for (tau, r)."""
    center = 1.0 / (2.0 * C) + C * (2.0 * n * tau + r * r)
    radius = math.sqrt(2.0 * n * tau + r * r + 1.0 / (2.0 * C) ** 2)
    return center, radius


def comparison_sphere_height(C: float, n: int, tau: float, r: float) -> float:
    """Lower height of that sphere after shrinking for time tau, at horizontal distance r."""
    center, radius = comparison_sphere(C, n, tau, r)
    return center - math.sqrt(radius * radius - 2.0 * n * tau - r * r)


def quadratic_growth_check(C: float = 1.0, grid: RadialGrid | None = None, scheme: SchemeConfig | None = None,
                           tau: float = 0.1, n: int = 2) -> float:
    """Max over nodes and sampled times of ``u - (C r^2 + 2 C n t)`` from ``u0 = C r^2``."""
    grid = grid or RadialGrid(4.0, 40)
    scheme = scheme or SchemeConfig(cfl=min(0.25, 1.0 / (2 * n)))
    r = grid.r
    R = grid.R_max
    bc = BoundarySpec(lambda t: C * R * R + 2.0 * C * n * t)
    worst = [-math.inf]

    def observe(state, _req):
        worst[0] = max(worst[0], float(np.max(state.u - (C * r * r + 2.0 * C * n * state.t))))

    h2 = grid.h ** 2
    dt = scheme.cfl * h2 if scheme.mode == "explicit" else scheme.dt
    samples = np.linspace(0.0, tau, int(math.ceil(tau / dt)) + 1)
    evolve(EvolutionState(grid, C * r * r), bc, tau, scheme, n, samples, observe)
    return worst[0]
