"""Elastic (square-root-velocity) shape distances between curves.

Exact and windowed matchers for piecewise-linear curves, rotation and seam
optimization, synthetic data generation and a Siamese convolutional surrogate.
"""

from .curves import (
    Curve,
    Reparam,
    SrvFunction,
    apply_reparam,
    apply_rotation,
    apply_shift,
    dq_distance,
    normalize_scale,
    normalize_translation,
    resample_uniform,
    srv,
    srv_inverse,
)
from .dp import dp_distance, dp_match
from .exact import MatchingPath, exact_distance_open, path_to_reparams, precise_match
from .quotient import ShapeDistanceResult, closed_distance, optimal_rotation, shape_distance

__version__ = "0.1.0"

__all__ = [
    "Curve", "Reparam", "SrvFunction", "MatchingPath", "ShapeDistanceResult",
    "apply_reparam", "apply_rotation", "apply_shift", "closed_distance", "dp_distance",
    "dp_match", "dq_distance", "exact_distance_open", "normalize_scale",
    "normalize_translation", "optimal_rotation", "path_to_reparams", "precise_match",
    "resample_uniform", "shape_distance", "srv", "srv_inverse",
]
