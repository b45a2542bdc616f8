"""Winglike translators: a neck of radius R joined to two graphical branches.

Near the neck the surface is a graph over the axis, ``r = h(y)``, and the
translator equation reads

    h'' = ((n - 1)/h - h')(1 + h'^2).

Once the neck has opened up, each side is continued as a radial graph
``u = W(r)`` by handing ``(r, phi = 1/h')`` to the slope ODE.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rk
from .csvio import write_columns
from .profiles import HeightProfile, PhiProfile, height_from_phi, integrate_phi

DEFAULT_TOL = 1e-11


class GeometryError(RuntimeError):
    """The neck integration collapsed or never reached its switch point."""


class ConsistencyError(RuntimeError):
    """Branch data do not match the inner arc at the switch point."""


class TailError(RuntimeError):
    """Offset estimates disagree between r_max and r_max/2."""


@dataclass(frozen=True)
class InnerArc:
    """Samples of ``r = h(y)`` through the turning point ``(0, R)``, sorted by y."""

    n: int
    R: float
    y: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    upper_switch: tuple[float, float, float]  # (y, h, h')
    lower_switch: tuple[float, float, float]


UPPER_CAP = 0.75


def _switch_limits(n: int, switch_slope: float):
    # |h'| >= 1/switch_slope is the nominal 45-degree rule.  On the upper side
    # h' stays below (n-1)/h, so there the threshold is capped at a fraction
    # of that line; the lower side always reaches the nominal value.
    return 1.0 / switch_slope, UPPER_CAP * (n - 1)


def _run_side(n, R, sign, step, arc_budget, tol, ev_a, ev_b):
    params = np.array([float(n), float(sign)])
    t_out = np.array([1e6 * max(R, 1.0)])
    status, _, _, st, sy, _, t_end, y_end = rk.integrate(
        rk.KIND_NECK, params, 0.0, np.array([float(R), 0.0]), t_out, tol, tol,
        min(step, 1e-3 * R), step, int(arc_budget), True, ev_a, ev_b)
    if status == rk.STATUS_COLLAPSE:
        raise GeometryError(f"h reached 0 at axial distance {t_end:.6g} before switching")
    if status != rk.STATUS_EVENT:
        raise GeometryError(f"neck integration ended without switching (status {status})")
    return st, sy


def integrate_height_over_axis(n: int, R: float, arc_budget: int = 200_000, step: float | None = None,
                               tol: float = DEFAULT_TOL, switch_slope: float = 1.0) -> InnerArc:
    """Integrate the neck equation both ways from ``h(0) = R, h'(0) = 0``."""
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    if not R > 0:
        raise ValueError("R must be positive")
    n = int(n)
    kappa = (n - 1) / R
    step = 0.05 / kappa if step is None else step
    if not (0 < step <= 0.5 / kappa):
        raise ValueError("step must resolve the neck curvature (n-1)/R")
    ev_a, ev_b = _switch_limits(n, switch_slope)
    up_s, up_y = _run_side(n, R, 1.0, step, arc_budget, tol, ev_a, ev_b)
    # the lower side in s = -y: g'' = ((n-1)/g + g')(1 + g'^2)
    lo_s, lo_y = _run_side(n, R, -1.0, step, arc_budget, tol, ev_a, 0.0)
    y = np.concatenate([-lo_s[:0:-1], up_s])
    h = np.concatenate([lo_y[:0:-1, 0], up_y[:, 0]])
    dh = np.concatenate([-lo_y[:0:-1, 1], up_y[:, 1]])
    upper = (float(up_s[-1]), float(up_y[-1, 0]), float(up_y[-1, 1]))
    lower = (float(-lo_s[-1]), float(lo_y[-1, 0]), float(-lo_y[-1, 1]))
    return InnerArc(n, float(R), y, h, dh, upper, lower)


def _branch(n, switch, r_max, tol, grid_step):
    y_s, h_s, dh_s = switch
    phi0 = 1.0 / dh_s
    p = integrate_phi(n, h_s, phi0, r_max, tol, grid_step)
    mismatch = abs(p.grid_phi[0] - phi0)
    if p.grid_r[0] != h_s or mismatch > tol:
        raise ConsistencyError(f"slope mismatch {mismatch:.3g} at the switch point")
    hp = height_from_phi(p, (h_s, y_s))
    if abs(hp.u[0] - y_s) > tol:
        raise ConsistencyError("height mismatch at the switch point")
    return p, hp


@dataclass(frozen=True)
class WingPair:
    """Both graphical branches of a winglike translator.

    ``upper`` (axial side y > 0) and ``lower`` (y < 0) are stored unshifted.
    After calibration the shifted lower branch is the upper barrier ``w_plus``
    and the shifted upper branch is the lower barrier ``w_minus``.
    """

    n: int
    R: float
    inner_arc: InnerArc
    upper: HeightProfile
    lower: HeightProfile
    upper_phi: PhiProfile
    lower_phi: PhiProfile
    shifts: tuple[float, float] = (0.0, 0.0)  # (s_plus, s_minus)
    C_plus: float = math.nan
    C_minus: float = math.nan
    switch_slope: float = 1.0

    @property
    def w_plus(self) -> HeightProfile:
        return self.lower.shifted(self.shifts[0])

    @property
    def w_minus(self) -> HeightProfile:
        return self.upper.shifted(self.shifts[1])

    @property
    def switch_radii(self) -> tuple[float, float]:
        return self.inner_arc.upper_switch[1], self.inner_arc.lower_switch[1]

    def full_branch(self, side: str):
        """(r, u, du/dr) along one side including the arc part, outward from the neck."""
        arc = self.inner_arc
        pos = arc.y > 0 if side == "upper" else arc.y < 0
        y, h, dh = arc.y[pos], arc.h[pos], arc.dh[pos]
        order = np.argsort(h)
        y, h, dh = y[order], h[order], dh[order]
        br = self.upper if side == "upper" else self.lower
        r = np.concatenate([h[:-1], br.r])
        u = np.concatenate([y[:-1], br.u])
        s = np.concatenate([1.0 / dh[:-1], br.slope])
        return r, u, s


def build_wing_pair(n: int, R: float, r_max: float, switch_slope: float = 1.0,
                    tol: float = DEFAULT_TOL, grid_step: float = 0.01) -> WingPair:
    if not r_max >= 20 * max(R, n - 1):
        raise ValueError("need r_max >= 20*max(R, n-1)")
    if not 0.5 <= switch_slope <= 2.0:
        raise ValueError("switch_slope must lie in [0.5, 2]")
    arc = integrate_height_over_axis(n, R, tol=tol, switch_slope=switch_slope)
    up_p, up_h = _branch(n, arc.upper_switch, r_max, tol, grid_step)
    lo_p, lo_h = _branch(n, arc.lower_switch, r_max, tol, grid_step)
    return WingPair(int(n), float(R), arc, up_h, lo_h, up_p, lo_p, switch_slope=switch_slope)


def asymptotic_offset(branch: HeightProfile, bowl: HeightProfile, tail_tol: float = 1e-6) -> float:
    """``lim (branch - bowl)`` read at the outermost common radius.

    The read at half that radius must agree to ``tail_tol``.
    """
    lo = max(branch.r[0], bowl.r[0])
    hi = min(branch.r[-1], bowl.r[-1])
    if not hi / 2 >= lo:
        raise TailError("common range too short for a doubling check")
    c_far = float(branch(hi) - bowl(hi))
    c_mid = float(branch(hi / 2) - bowl(hi / 2))
    if not abs(c_far - c_mid) < tail_tol:
        raise TailError(f"offset unstable: {c_far!r} at r={hi:g} vs {c_mid!r} at r={hi / 2:g}")
    return c_far


def calibrate_shifts(pair: WingPair, bowl: HeightProfile, epsilon: float,
                     tail_tol: float = 1e-6) -> WingPair:
    """Shift the branches so that ``W+ - U -> +eps`` and ``W- - U -> -eps``."""
    if bowl.n != pair.n:
        raise ValueError("bowl and wings have different n")
    if not epsilon >= 0:
        raise ValueError("epsilon must be nonnegative")
    c_plus = asymptotic_offset(pair.lower, bowl, tail_tol)
    c_minus = asymptotic_offset(pair.upper, bowl, tail_tol)
    shifts = (epsilon - c_plus, -epsilon - c_minus)
    return replace(pair, shifts=shifts, C_plus=c_plus, C_minus=c_minus)


def common_grid(pair: WingPair, bowl: HeightProfile) -> np.ndarray:
    lo = max(pair.upper.r[0], pair.lower.r[0])
    hi = min(pair.upper.r[-1], pair.lower.r[-1], bowl.r[-1])
    r = bowl.r[(bowl.r >= lo) & (bowl.r <= hi)]
    return r


def write_wing_csv(pair: WingPair, bowl: HeightProfile, path) -> str:
    r = common_grid(pair, bowl)
    return write_columns(path, ("r", "w_plus", "w_minus", "u_bowl"),
                         (r, pair.w_plus(r), pair.w_minus(r), bowl(r)))


def write_arc_csv(arc: InnerArc, path) -> str:
    return write_columns(path, ("y", "h"), (arc.y, arc.h))
