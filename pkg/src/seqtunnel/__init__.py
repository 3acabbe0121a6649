"""Stress and displacement fields for staged shallow tunnel excavation.

The ground below a horizontal surface with one cavity is mapped onto an
annulus, and the mixed boundary value problem (free surface above the
excavation, fixed surface further out) is solved as a truncated Laurent
series.
"""
from importlib import resources

from .config import RunConfig, benchmark_config, from_dict, load_config
from .conformal import BidirectionalMap, MapOptions, MobiusMap, build_map
from .estimator import ConformalMapper, TunnelSolver
from .exceptions import SeqTunnelError
from .fields import FieldSample, Profile, cavity_profile, field_at_points, ground_profile
from .geometry import Arc, GroundSplit, Line, Material, StageBoundary, benchmark_stage, fillet_corners
from .pipeline import SolverOptions, StageSolution, solve_stage
from .verify import SweepResult, Thresholds, VerificationReport, corner_sweep, kx_sweep, verify_stage, x0_convergence

__version__ = "0.1.0"


def bundled_config_path():
    """Path of the shipped benchmark YAML."""
    return resources.files(__name__).joinpath("data/paper-4stage.yaml")


__all__ = [
    "Arc", "BidirectionalMap", "ConformalMapper", "FieldSample", "GroundSplit", "Line", "MapOptions",
    "Material", "MobiusMap", "Profile", "RunConfig", "SeqTunnelError", "SolverOptions", "StageBoundary",
    "StageSolution", "SweepResult", "Thresholds", "TunnelSolver", "VerificationReport", "benchmark_config",
    "benchmark_stage", "build_map", "bundled_config_path", "cavity_profile", "corner_sweep", "field_at_points",
    "fillet_corners", "from_dict", "ground_profile", "kx_sweep", "load_config", "solve_stage", "verify_stage",
    "x0_convergence",
]
