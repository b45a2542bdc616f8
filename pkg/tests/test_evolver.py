from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cached_bowl
from mcflab.csvio import read_columns
from mcflab.evolver import (
    BoundarySpec,
    EvolutionError,
    EvolutionState,
    RadialGrid,
    RadialOperator,
    SchemeConfig,
    SchemeError,
    StepError,
    evolve,
    explicit_dt,
    radial_rhs,
    step_explicit,
    step_implicit,
    write_trajectory,
)
from mcflab.experiments import catenoid_slope


def bowl_state(n, grid):
    b = cached_bowl(n, 20.0, 1e-11, 0.005)
    return b, EvolutionState(grid, b(grid.r))


def test_constant_has_zero_rhs():
    g = RadialGrid(3.0, 30)
    for Q in (0.0, 1.0, math.inf):
        assert np.all(radial_rhs(EvolutionState(g, np.full(31, 7.5)), 3, Q) == 0.0)


def test_grid_and_state_checks():
    with pytest.raises(ValueError):
        RadialGrid(1.0, 8)
    g = RadialGrid(1.0, 16)
    with pytest.raises(ValueError):
        EvolutionState(g, np.zeros(5))
    with pytest.raises(ValueError):
        EvolutionState(g, np.full(17, np.nan))
    s = EvolutionState(g, np.zeros(17))
    with pytest.raises(ValueError):
        s.u[0] = 1.0


@pytest.mark.parametrize("n", [2, 3])
def test_bowl_rhs_is_one_to_second_order(n):
    errs = []
    for M in (40, 80):
        g = RadialGrid(4.0, M)
        b, s = bowl_state(n, g)
        rhs = radial_rhs(s, n, slope_bound=0.0)
        errs.append(np.max(np.abs(rhs[:-1] - 1.0)))
    assert 3.2 < errs[0] / errs[1] < 4.8


@pytest.mark.parametrize("n", [2, 3])
def test_sphere_cap_rhs(n):
    rho = 1.0
    errs = []
    for M in (32, 64):
        g = RadialGrid(0.5, M)
        r = g.r
        s = EvolutionState(g, -np.sqrt(rho ** 2 - r ** 2))
        rhs = radial_rhs(s, n, slope_bound=0.0)
        errs.append(np.max(np.abs(rhs[:-1] - n / np.sqrt(rho ** 2 - r[:-1] ** 2))))
    assert errs[1] < 1e-3
    assert 3.2 < errs[0] / errs[1] < 4.8


def test_scheme_config_refusals():
    with pytest.raises(SchemeError):
        SchemeConfig(cfl=0.3)
    with pytest.raises(SchemeError):
        SchemeConfig(cfl=0.0)
    with pytest.raises(SchemeError):
        SchemeConfig(mode="rk4")
    with pytest.raises(SchemeError):
        SchemeConfig(newton_tol=0.0)
    with pytest.raises(SchemeError):
        SchemeConfig(dt=-1.0)


def test_explicit_refuses_non_monotone_steps():
    g = RadialGrid(2.0, 20)
    s = EvolutionState(g, np.zeros(21))
    bc = BoundarySpec.constant(0.0)
    with pytest.raises(SchemeError):
        step_explicit(s, bc, 0.3 * g.h ** 2, 2)
    # the origin node limits dt/h^2 to 1/(2n): n=3 needs cfl <= 1/6
    op = RadialOperator(g, 3)
    with pytest.raises(SchemeError):
        explicit_dt(op, SchemeConfig(cfl=0.2))
    assert explicit_dt(op, SchemeConfig(cfl=1 / 6)) == pytest.approx(g.h ** 2 / 6)
    annulus = RadialGrid(2.0, 20, r_min=1.0)
    with pytest.raises(SchemeError):
        step_explicit(EvolutionState(annulus, np.zeros(21)), bc, 1e-4, 2)


def test_constant_is_fixed_point():
    g = RadialGrid(2.0, 20)
    s = EvolutionState(g, np.full(21, -1.25))
    bc = BoundarySpec.constant(-1.25)
    s1 = step_explicit(s, bc, 0.2 * g.h ** 2, 2)
    assert np.array_equal(s1.u, s.u)
    s2 = step_implicit(s, bc, 0.1, 2)
    assert np.max(np.abs(s2.u - s.u)) <= 1e-12


def test_bowl_step_gains_dt():
    n = 2
    g = RadialGrid(4.0, 80)
    b, s = bowl_state(n, g)
    dt = 0.2 * g.h ** 2
    bc = BoundarySpec(lambda t: b(4.0) + t)
    s1 = step_explicit(s, bc, dt, n, SchemeConfig(slope_bound=0.0))
    assert s1.t == dt
    assert np.max(np.abs(s1.u - s.u - dt)) <= 2.0 * dt * g.h ** 2


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2 ** 32 - 1),
    n=st.integers(2, 4),
    Q=st.sampled_from([0.0, 1.0, math.inf]),
)
def test_one_step_preserves_order(seed, n, Q):
    rng = np.random.default_rng(seed)
    g = RadialGrid(3.0, 24)
    lo = rng.normal(scale=rng.choice([0.1, 1.0, 5.0]), size=25)
    # strictly ordered pairs; exact ties can flip by one ulp
    hi = lo + rng.uniform(1e-6, 0.1, size=25) * rng.choice([1e-3, 1.0, 10.0])
    if Q < math.inf:
        # the centered share is only monotone for slopes within the bound
        lo = np.cumsum(np.clip(np.diff(lo, prepend=0.0), -0.9 * Q * g.h, 0.9 * Q * g.h))
        hi = lo + rng.uniform(1e-6, 0.1, size=25) * (0.9 * Q * g.h if Q else 1.0)
        if Q == 0:
            lo = np.full(25, lo[0])
            hi = np.full(25, lo[0] + 0.05)
    scheme = SchemeConfig(cfl=min(0.25, 1.0 / (2 * n)), slope_bound=Q)
    op = RadialOperator(g, n, Q)
    dt = min(scheme.cfl, op.max_stable_ratio()) * g.h ** 2
    a = step_explicit(EvolutionState(g, lo), BoundarySpec.constant(lo[-1]), dt, n, scheme, op)
    b = step_explicit(EvolutionState(g, hi), BoundarySpec.constant(hi[-1]), dt, n, scheme, op)
    assert np.all(a.u <= b.u)


def catenoid_profile(n, c, r):
    from scipy.integrate import cumulative_trapezoid

    fine = np.linspace(r[0], r[-1], 200 * (r.size - 1) + 1)
    f = cumulative_trapezoid(catenoid_slope(fine, n, c), fine, initial=0.0)
    return f[::200]


def test_implicit_keeps_catenoid_static():
    n, c = 3, 1.0
    errs = []
    for M in (40, 80):
        g = RadialGrid(4.0, M, r_min=1.5)
        f = catenoid_profile(n, c, g.r)
        s = EvolutionState(g, f)
        bc = BoundarySpec.constant(f[-1], f[0])
        scheme = SchemeConfig(mode="implicit", dt=0.05, slope_bound=0.0)
        traj = evolve(s, bc, 1.0, scheme, n)
        errs.append(np.max(np.abs(traj.states[-1].u - f)))
    assert errs[1] < 1e-3
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_implicit_first_order_in_time():
    n = 2
    g = RadialGrid(2.0, 32)
    u0 = 0.5 * np.exp(-g.r ** 2)
    s = EvolutionState(g, u0)
    bc = BoundarySpec.constant(u0[-1])
    T = 0.2
    ref = evolve(s, bc, T, SchemeConfig(cfl=0.01), n).states[-1].u
    errs = [np.max(np.abs(evolve(s, bc, T, SchemeConfig(mode="implicit", dt=dt), n).states[-1].u - ref))
            for dt in (0.02, 0.01, 0.005)]
    for e0, e1 in zip(errs, errs[1:]):
        assert 1.6 < e0 / e1 < 2.4


def test_newton_failure_carries_residual():
    g = RadialGrid(2.0, 32)
    s = EvolutionState(g, 3.0 * np.sin(4 * g.r))
    with pytest.raises(StepError) as info:
        step_implicit(s, BoundarySpec.constant(0.0), 1.0, 2, newton_tol=1e-14, newton_max_iters=1)
    assert info.value.residual > 1e-14
    with pytest.raises(EvolutionError) as info:
        evolve(s, BoundarySpec.constant(0.0), 2.0,
               SchemeConfig(mode="implicit", dt=1.0, newton_tol=1e-14, newton_max_iters=1), 2)
    assert isinstance(info.value.cause, StepError)


def test_zero_horizon_returns_initial_state():
    g = RadialGrid(1.0, 16)
    s = EvolutionState(g, np.ones(17))
    traj = evolve(s, BoundarySpec.constant(1.0), 0.0, SchemeConfig(), 2)
    assert traj.states == [s] and traj.times == [0.0]
    with pytest.raises(ValueError):
        evolve(s, BoundarySpec.constant(1.0), -1.0, SchemeConfig(), 2)


@pytest.mark.parametrize("balanced", [False, True])
def test_bowl_translates(balanced):
    n = 2
    g = RadialGrid(4.0, 40)
    b, s = bowl_state(n, g)
    u_end = b(4.0)
    scheme = SchemeConfig(cfl=0.2, slope_bound=0.0, well_balanced=balanced)
    times = np.arange(0.0, 5.0 + 1e-9, 0.5)
    traj = evolve(s, BoundarySpec(lambda t: u_end + t), 5.0, scheme, n, times, reference=s.u)
    dev = max(np.max(np.abs(st.u - s.u - st.t)) for st in traj.states)
    assert dev <= 10 * g.h ** 2
    if balanced:
        assert dev <= 1e-10


def test_translation_equivariance():
    n = 2
    g = RadialGrid(2.0, 32)
    u0 = 0.3 * np.cos(3 * g.r)
    bc = BoundarySpec.constant(u0[-1])
    c = 2.5
    for scheme in (SchemeConfig(), SchemeConfig(mode="implicit", dt=0.01)):
        a = evolve(EvolutionState(g, u0), bc, 0.2, scheme, n).states[-1].u
        b = evolve(EvolutionState(g, u0 + c), bc.shifted(c), 0.2, scheme, n).states[-1].u
        # only rounding of u + c separates the two runs
        assert np.max(np.abs(b - c - a)) <= 1e-12


def test_sampling_at_or_after_requested_times():
    g = RadialGrid(1.0, 16)
    s = EvolutionState(g, np.zeros(17))
    seen = []
    traj = evolve(s, BoundarySpec.constant(0.0), 0.05, SchemeConfig(), 2, [0.0, 0.013, 0.02, 0.05],
                  observer=lambda st_, req: seen.append(req))
    dt = 0.2 * g.h ** 2
    assert seen == traj.requested == [0.0, 0.013, 0.02, 0.05]
    for req, t in zip(traj.requested, traj.times):
        assert req - 1e-12 <= t < req + dt + 1e-12


def test_write_trajectory(tmp_path):
    g = RadialGrid(1.0, 16)
    s = EvolutionState(g, np.linspace(0, 1, 17) ** 2)
    traj = evolve(s, BoundarySpec.constant(1.0), 0.01, SchemeConfig(), 2, [0.0, 0.005, 0.01])
    manifest = write_trajectory(traj, tmp_path)
    lines = open(manifest).read().splitlines()
    assert len(lines) == 4
    name = lines[2].split()[-1]
    cols = read_columns(tmp_path / name)
    np.testing.assert_array_equal(cols["u"], traj.states[1].u)
    np.testing.assert_array_equal(cols["r"], g.r)

