from __future__ import annotations

import functools
import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import cached_bowl
from mcflab.csvio import read_columns
from mcflab.evolver import BoundarySpec, EvolutionState, RadialGrid, SchemeConfig, evolve
from mcflab.experiments import (
    ExperimentConfigError,
    PerturbationSpec,
    catenoid_slope,
    catenoid_static_residual,
    catenoid_tail_height,
    check_barrier_ordering,
    comparison_sphere,
    comparison_sphere_height,
    quadratic_growth_check,
    run_plane_stability,
    run_soliton_stability,
)
from mcflab.wings import build_wing_pair, calibrate_shifts

SMALL = RadialGrid(30.0, 150)


@functools.lru_cache(maxsize=None)
def small_run(amplitude: float):
    return run_soliton_stability(2, PerturbationSpec("compact-bump", amplitude, 3.0), 0.05, 5.0,
                                 SMALL, T=8.0, sample_dt=0.2, keep_trajectory=True)


def test_perturbation_shapes():
    bump = PerturbationSpec("compact-bump", 2.0, 3.0)
    assert bump(0.0) == 2.0 and bump(3.0) == 0.0 and bump(5.0) == 0.0
    R0 = bump.radius_above(0.05)
    assert bump(R0) == pytest.approx(0.05)
    slow = PerturbationSpec("slow-decay", 1.0, p=0.5)
    assert slow(3.0) == 0.5
    assert slow(slow.radius_above(0.1)) == pytest.approx(0.1)
    assert PerturbationSpec("compact-bump", 0.01).radius_above(0.05) == 0.0
    for bad in (dict(kind="wave"), dict(amplitude=math.inf), dict(rho=0.0), dict(kind="slow-decay", p=0.0)):
        with pytest.raises(ExperimentConfigError):
            PerturbationSpec(**bad)


def test_zero_perturbation_stays_on_translator():
    rep = run_soliton_stability(2, PerturbationSpec("compact-bump", 0.0), grid=SMALL, T=2.0, sample_dt=0.5)
    assert np.all(rep.sup_dev <= 10 * SMALL.h ** 2)
    assert rep.T_star == 0.0
    assert rep.omega_clear_after_t_star()


def test_hypothesis_violations_are_refused():
    with pytest.raises(ExperimentConfigError):
        run_soliton_stability(2, PerturbationSpec("slow-decay", 1.0, p=0.5), grid=SMALL, T=1.0)
    with pytest.raises(ExperimentConfigError):
        run_soliton_stability(2, PerturbationSpec("compact-bump", 1.0, 3.0), R_wing=1.0, grid=SMALL, T=1.0)
    with pytest.raises(ExperimentConfigError):
        run_soliton_stability(2, PerturbationSpec(), epsilon=0.0, grid=SMALL, T=1.0)


def test_barriers_hold_at_start_and_throughout():
    rep, traj, pair = small_run(1.0)
    assert rep.barrier_violation[0] <= 1e-12
    assert rep.barrier_violation_max <= 20 * SMALL.h ** 2
    assert check_barrier_ordering(traj, pair, 5.0) == pytest.approx(rep.barrier_violation_max, abs=1e-12)


def test_report_sanity_and_localisation():
    rep, traj, pair = small_run(1.0)
    assert np.all(rep.sup_dev >= 0)
    assert np.all(rep.sup_dev <= rep.sup_dev[0] + 20 * SMALL.h ** 2)
    U = cached_bowl(2, 60.0)(SMALL.r)
    for st in traj.states:
        far = np.abs(st.u - U - st.t) > 2 * rep.epsilon
        assert np.all(SMALL.r[far] <= 2 * 5.0 + SMALL.h + 1e-12)


def test_negated_bump_obeys_same_sandwich():
    up, _, _ = small_run(1.0)
    down, _, _ = small_run(-1.0)
    for rep in (up, down):
        assert rep.barrier_violation_max <= 20 * SMALL.h ** 2
        assert np.all(rep.sup_dev <= rep.sup_dev[0] + 20 * SMALL.h ** 2)
    assert up.sup_dev[0] == down.sup_dev[0]


def test_evolved_wing_stays_above_evolved_bowl():
    n, R_wing = 2, 5.0
    bowl = cached_bowl(2, 100.0)
    pair = calibrate_shifts(build_wing_pair(n, R_wing, 100.0, grid_step=0.005), bowl, 0.05)
    g = RadialGrid(30.0, 100, r_min=2 * R_wing)
    wp, U = pair.w_plus(g.r), bowl(g.r)
    assert np.all(wp > U)
    wm = pair.w_minus(g.r)
    assert np.all(wm < U)
    scheme = SchemeConfig(cfl=0.25)
    times = np.linspace(0.0, 2.0, 21)
    ends = lambda v: BoundarySpec(lambda t, a=v[-1]: a + t, lambda t, a=v[0]: a + t)
    runs = [evolve(EvolutionState(g, v), ends(v), 2.0, scheme, n, times) for v in (wm, U, wp)]
    for lo, mid, hi in zip(*(r.states for r in runs)):
        assert np.all(lo.u <= mid.u) and np.all(mid.u <= hi.u)


def test_report_written(tmp_path):
    rep, _, _ = small_run(1.0)
    csv, manifest = rep.write(tmp_path)
    cols = read_columns(csv)
    assert list(cols) == ["t", "sup_dev", "omega_count", "barrier_violation"]
    np.testing.assert_array_equal(cols["sup_dev"], rep.sup_dev)
    tail = open(csv).read().splitlines()[-1]
    assert tail.startswith("# T_star=")
    text = open(manifest).read()
    assert "experiment = soliton" in text and "R_max = 30.0" in text


def test_plane_needs_three_dimensions():
    with pytest.raises(ExperimentConfigError, match="n >= 3"):
        run_plane_stability(2, PerturbationSpec())


@pytest.mark.parametrize("n,c", [(3, 1.0), (3, 9.0), (4, 2.0), (6, 0.5)])
def test_catenoid_is_static(n, c):
    r0 = c ** (1.0 / (n - 1))
    r = np.linspace(r0 * 1.01, 20.0, 500)
    assert np.max(np.abs(catenoid_static_residual(r, n, c))) <= 1e-8
    # independent check against a centered difference of the slope
    fp = catenoid_slope(r, n, c)
    k = 1e-6
    fpp = (catenoid_slope(r + k, n, c) - catenoid_slope(r - k, n, c)) / (2 * k)
    assert np.max(np.abs(fpp / (1 + fp ** 2) + (n - 1) * fp / r)) <= 1e-6


def test_catenoid_tail_height():
    n, c = 3, 1.0
    # for n = 3, c = 1: f' = 1/sqrt(r^4 - 1), tail from r to inf
    from scipy.integrate import quad

    ref, _ = quad(lambda x: 1 / math.sqrt(x ** 4 - 1), 2.0, math.inf, epsabs=1e-14)
    assert catenoid_tail_height(2.0, n, c) == pytest.approx(ref, abs=1e-10)
    assert catenoid_tail_height(1.0, n, c) > catenoid_tail_height(1.5, n, c)
    with pytest.raises(ValueError):
        catenoid_tail_height(0.5, n, c)


def test_plane_zero_data_stays_flat():
    g = RadialGrid(10.0, 50)
    rep = run_plane_stability(3, PerturbationSpec("compact-bump", 0.0), grid=g, T=1.0, sample_dt=0.5)
    assert np.all(rep.sup_dev <= 10 * g.h ** 2)


def test_comparison_sphere_identity_exact():
    for C, n, tau, r in ((Fraction(1), 2, Fraction(1, 10), Fraction(3, 7)), (Fraction(5, 3), 4, Fraction(2), Fraction(0))):
        center = 1 / (2 * C) + C * (2 * n * tau + r * r)
        radius2 = 2 * n * tau + r * r + 1 / (2 * C) ** 2
        # after time tau the radius^2 has dropped by 2 n tau; the height above r is
        under = radius2 - 2 * n * tau - r * r
        assert under == (1 / (2 * C)) ** 2
        assert center - 1 / (2 * C) == C * r * r + 2 * C * n * tau
        fc, fr = comparison_sphere(float(C), n, float(tau), float(r))
        assert fc == pytest.approx(float(center), rel=1e-15)
        assert fr ** 2 == pytest.approx(float(radius2), rel=1e-15)
        assert comparison_sphere_height(float(C), n, float(tau), float(r)) == pytest.approx(
            float(C * r * r + 2 * C * n * tau), abs=1e-14)


def test_quadratic_growth_bound():
    g = RadialGrid(4.0, 40)
    assert quadratic_growth_check(1.0, g, tau=0.1, n=2) <= 20 * g.h ** 2


def test_quadratic_growth_plane_limit():
    g = RadialGrid(4.0, 40)
    assert quadratic_growth_check(1e-14, g, tau=0.1, n=2) <= 10 * g.h ** 2
