"""Constant-mean-curvature surfaces in asymptotically flat 3-manifolds."""

from ._cmcprobe import (
    ConfigError,
    Error,
    MetricModel,
    SphereGraph,
    centered_sphere_mean_curvature,
    centered_sphere_radius,
    functional_report,
    hawking_mass,
    mean_curvature,
    mode_count,
    mode_index,
    run,
    solve_cmc,
    taylor_fit,
)

__all__ = [
    "ConfigError",
    "Error",
    "MetricModel",
    "SphereGraph",
    "centered_sphere_mean_curvature",
    "centered_sphere_radius",
    "functional_report",
    "hawking_mass",
    "mean_curvature",
    "mode_count",
    "mode_index",
    "run",
    "solve_cmc",
    "taylor_fit",
]
__version__ = "0.3.0"
