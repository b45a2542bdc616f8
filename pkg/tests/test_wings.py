from __future__ import annotations

import numpy as np
import pytest

from conftest import cached_bowl, cached_wings
from mcflab.csvio import read_columns
from mcflab.profiles import translator_residual
from mcflab.wings import (
    GeometryError,
    TailError,
    asymptotic_offset,
    build_wing_pair,
    calibrate_shifts,
    integrate_height_over_axis,
    write_arc_csv,
    write_wing_csv,
)


def pair21():
    return cached_wings(2, 1.0, 40.0)


@pytest.mark.parametrize("n,R", [(2, 1.0), (3, 2.0), (5, 0.5)])
def test_arc_turning_point(n, R):
    arc = integrate_height_over_axis(n, R)
    k = int(np.argmin(np.abs(arc.y)))
    assert arc.y[k] == 0.0 and arc.h[k] == R and arc.dh[k] == 0.0
    assert np.all(arc.h >= R)
    near = (np.abs(arc.y) > 0) & (np.abs(arc.y) < 0.2 * R)
    assert np.all(arc.h[near] > R)
    # h''(0) from the samples
    y, h = arc.y, arc.h
    d2 = 2 * (h[k + 1] - h[k]) / (y[k + 1] ** 2) if y[k + 1] > 0 else np.nan
    assert d2 == pytest.approx((n - 1) / R, rel=1e-2)


def test_arc_curvature_n2_unit_neck():
    arc = integrate_height_over_axis(2, 1.0, step=1e-3)
    k = int(np.argmin(np.abs(arc.y)))
    d2 = (arc.h[k + 1] - 2 * arc.h[k] + arc.h[k - 1]) / (arc.y[k + 1] - arc.y[k]) ** 2
    assert d2 == pytest.approx(1.0, abs=1e-5)


def test_arc_argument_errors():
    with pytest.raises(ValueError):
        integrate_height_over_axis(2, -1.0)
    with pytest.raises(ValueError):
        integrate_height_over_axis(2, 1.0, step=0.9)
    with pytest.raises(GeometryError):
        integrate_height_over_axis(2, 1.0, arc_budget=3)


def test_build_preconditions():
    with pytest.raises(ValueError):
        build_wing_pair(2, 1.0, 10.0)
    with pytest.raises(ValueError):
        build_wing_pair(2, 1.0, 40.0, switch_slope=3.0)


def test_branches_start_at_switch_points():
    p = pair21()
    up_s, lo_s = p.inner_arc.upper_switch, p.inner_arc.lower_switch
    assert p.upper.r[0] == up_s[1] and p.upper.u[0] == up_s[0]
    assert p.lower.r[0] == lo_s[1] and p.lower.u[0] == lo_s[0]
    assert p.upper_phi.grid_phi[0] == 1.0 / up_s[2]
    assert p.lower_phi.grid_phi[0] == 1.0 / lo_s[2]


def test_slope_blows_up_toward_neck():
    p = pair21()
    for side, sign in (("upper", 1.0), ("lower", -1.0)):
        r, u, s = p.full_branch(side)
        assert np.all(sign * s[:20] > 0)
        assert np.all(np.diff(np.abs(s[:20])) < 0)
        # near the neck |dW/dr| ~ (2 (n-1) (r-R)/R)^(-1/2)
        delta = r[0] - p.R
        assert abs(s[0]) * np.sqrt(2 * (p.n - 1) * delta / p.R) == pytest.approx(1.0, rel=0.05)
    assert abs(p.lower_phi.grid_phi[0]) >= 1.0 / p.switch_slope - 1e-12


def test_gap_positive_increasing_and_tail_stable():
    p = pair21()
    lo = max(p.upper.r[0], p.lower.r[0])
    r = np.linspace(lo, 40.0, 2000)
    gap = p.upper(r) - p.lower(r)
    assert np.all(gap > 0)
    assert np.all(np.diff(gap) > -1e-12)
    assert abs(p.upper(40.0) - p.lower(40.0) - (p.upper(20.0) - p.lower(20.0))) < 1e-6


def test_offsets_are_tail_stable():
    p = pair21()
    bowl = cached_bowl(2)
    for br in (p.upper, p.lower):
        c = asymptotic_offset(br, bowl)
        assert abs((br(20.0) - bowl(20.0)) - c) < 1e-6


def test_offset_trivial_cases():
    bowl = cached_bowl(2)
    assert asymptotic_offset(bowl, bowl) == 0.0
    assert asymptotic_offset(bowl.shifted(5.0), bowl) == 5.0


def test_offset_rejects_unstable_tail():
    bowl = cached_bowl(2)
    tilted = type(bowl)(2, bowl.r, bowl.u + 1e-3 * bowl.r, bowl.slope + 1e-3, bowl.anchor)
    with pytest.raises(TailError):
        asymptotic_offset(tilted, bowl)


def test_calibration_round_trip():
    bowl = cached_bowl(2)
    eps = 0.05
    cal = calibrate_shifts(pair21(), bowl, eps)
    assert asymptotic_offset(cal.w_plus, bowl) == pytest.approx(eps, abs=1e-6)
    assert asymptotic_offset(cal.w_minus, bowl) == pytest.approx(-eps, abs=1e-6)
    gap = cal.w_plus(40.0) - cal.w_minus(40.0)
    assert gap == pytest.approx(2 * eps, abs=1e-6)
    zero = calibrate_shifts(pair21(), bowl, 0.0)
    assert abs(asymptotic_offset(zero.w_plus, bowl)) < 1e-6
    assert abs(asymptotic_offset(zero.w_minus, bowl)) < 1e-6


def test_shift_equivariance():
    bowl = cached_bowl(2)
    a = calibrate_shifts(pair21(), bowl, 0.05)
    b = calibrate_shifts(pair21(), bowl, 0.10)
    r = a.lower.r
    dp = b.w_plus.u - a.w_plus.u
    dm = a.w_minus.u - b.w_minus.u
    # constants add; the only discrepancy is rounding of the stored heights
    scale = np.finfo(float).eps * (np.abs(a.w_plus.u).max() + 1)
    assert np.max(np.abs(dp - 0.05)) <= 4 * scale
    assert np.max(np.abs(dm - 0.05)) <= 4 * scale
    assert r.size == b.lower.r.size


def test_calibration_checks():
    bowl3 = cached_bowl(3)
    with pytest.raises(ValueError):
        calibrate_shifts(pair21(), bowl3, 0.05)
    with pytest.raises(ValueError):
        calibrate_shifts(pair21(), cached_bowl(2), -0.1)


def test_non_convex_across_neck():
    p = pair21()
    arc = p.inner_arc
    k = int(np.argmin(np.abs(arc.y)))
    assert arc.h[k + 1] - 2 * arc.h[k] + arc.h[k - 1] > 0
    # the upper branch is concave right after the neck and convex far out
    r, u, s = p.full_branch("upper")
    ds = np.diff(s)
    assert ds[0] < 0 and ds[-1] > 0


@pytest.mark.parametrize("n,R", [(2, 1.0), (3, 1.0)])
def test_branch_residuals(n, R):
    r_max = 20 * max(R, n - 1)
    p = build_wing_pair(n, R, r_max, grid_step=0.002)
    for br, sw in ((p.upper, p.inner_arc.upper_switch[1]), (p.lower, p.inner_arc.lower_switch[1])):
        rho = np.abs(translator_residual(br))
        near = br.r < sw + 1.0
        assert rho[near].max() <= 1e-4
        assert rho[~near].max() <= 1e-5


def test_csv_outputs(tmp_path):
    bowl = cached_bowl(2)
    cal = calibrate_shifts(pair21(), bowl, 0.05)
    cols = read_columns(write_wing_csv(cal, bowl, tmp_path / "w.csv"))
    assert list(cols) == ["r", "w_plus", "w_minus", "u_bowl"]
    assert np.all(cols["w_plus"] > cols["w_minus"])
    cols = read_columns(write_arc_csv(cal.inner_arc, tmp_path / "arc.csv"))
    assert list(cols) == ["y", "h"]
    assert np.all(np.diff(cols["y"]) > 0)
