"""Planar pose-graph and landmark SLAM solved through a low-rank semidefinite relaxation, with optimality certificates."""

from .graph import MeasurementGraph, PoseLandmarkEdge, PosePoseEdge, validate
from .se2 import PlanarPose, UnitComplex, compose, from_angle, inverse

__version__ = "0.1.0"

__all__ = [
    "MeasurementGraph",
    "PoseLandmarkEdge",
    "PosePoseEdge",
    "PlanarPose",
    "UnitComplex",
    "compose",
    "from_angle",
    "inverse",
    "validate",
]
