"""Translating solitons of graphical mean curvature flow.

Radial profiles of the bowl and winglike translators, exact asymptotic series,
a monotone radial MCF solver and the stability experiments built on them.
"""
from __future__ import annotations

__version__ = "0.1.0"

from ._accel import backend
from .series import OriginSeries, TailSeries, expand_origin, expand_tail
from .profiles import (
    HeightProfile,
    PhiProfile,
    bowl_height,
    bowl_phi,
    height_from_phi,
    integrate_phi,
    translator_residual,
)
from .wings import WingPair, asymptotic_offset, build_wing_pair, calibrate_shifts, integrate_height_over_axis
from .evolver import (
    BoundarySpec,
    EvolutionState,
    RadialGrid,
    SchemeConfig,
    evolve,
    radial_rhs,
    step_explicit,
    step_implicit,
)
from .experiments import (
    PerturbationSpec,
    StabilityReport,
    check_barrier_ordering,
    quadratic_growth_check,
    run_plane_stability,
    run_soliton_stability,
)

__all__ = [
    "backend",
    "OriginSeries", "TailSeries", "expand_origin", "expand_tail",
    "HeightProfile", "PhiProfile", "bowl_height", "bowl_phi", "height_from_phi", "integrate_phi",
    "translator_residual",
    "WingPair", "asymptotic_offset", "build_wing_pair", "calibrate_shifts", "integrate_height_over_axis",
    "BoundarySpec", "EvolutionState", "RadialGrid", "SchemeConfig", "evolve", "radial_rhs",
    "step_explicit", "step_implicit",
    "PerturbationSpec", "StabilityReport", "check_barrier_ordering", "quadratic_growth_check",
    "run_plane_stability", "run_soliton_stability",
]
