"""Lipschitz-Killing curvature measures of stratified sets, and the index formulas they satisfy."""

from .boundary import (
    BoundaryMeasure,
    MorseReport,
    boundary_gb_measure,
    mean_boundary_identity,
    morse_identity,
    verify_boundary_limits,
    verify_fu,
)
from .constructible import (
    ConstructibleFunction,
    bdk_global,
    bdk_local,
    eta,
    euler_obstruction,
    euler_obstruction_basis,
    local_euler_obstruction,
)
from .curvature import CurvatureSeries, lk_density, lkw_curvature, measure, second_fundamental_form
from .limits import (
    euler_obstruction_via_curvature,
    scaled_limits,
    stratum_curvature_limit,
    verify_global,
    verify_local_gb,
    verify_main_theorem,
)
from .mathkit import EpsilonLadder, LimitEstimate, extrapolate_limit
from .polar import PolarEstimate, SliceSpec, sigma, slice_euler_characteristic, verify_curv_polar
from .report import IdentityReport, emit_report
from .variety import StratifiedSpace, builtin, load, loads, names

__version__ = "0.1.0"
