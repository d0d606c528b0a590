"""Lipschitz-continuous QP safety filters for Euler-Lagrange systems among ball obstacles."""
from .basis import PositiveBasis, build_circle_basis, build_sphere_basis, verify_coverage
from .conditions import check_parameter_conditions, lipschitz_certificate, synthesize_shaping
from .dynamics import InnerLoopGains, State, TwoLinkModel
from .filters import SafetyFilter
from .geometry import ObstacleField, check_assumption3, cover_unsafe_region
from .params import FilterParams, preset
from .qp import HalfspaceSet, project
from .scenario import Scenario, run_closed_loop
from .shaping import ShapingFns

__version__ = "0.1.0"
