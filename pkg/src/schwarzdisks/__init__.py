"""Parallel Schwarz iteration on unions of disks, layer analysis for unions of balls."""

from .errors import (
    DegenerateArc,
    Disconnected,
    InsufficientIterations,
    InvalidSpec,
    MissingSkeletonData,
    NoBoundaryNode,
    NoExteriorBoundary,
    NoIntersection,
    ParseError,
    SchwarzError,
    TangentIntersection,
    TooCloseToBoundary,
    UnknownElement,
    ZeroDenominator,
)
from .geometry2d import (
    ArcPiece,
    Disk,
    Geometry2D,
    Skeleton,
    build_geometry,
    build_skeletons,
    exposure_fraction_2d,
    partition_boundary,
)

__all__ = [
    "ArcPiece",
    "DegenerateArc",
    "Disconnected",
    "Disk",
    "Geometry2D",
    "InsufficientIterations",
    "InvalidSpec",
    "MissingSkeletonData",
    "NoBoundaryNode",
    "NoExteriorBoundary",
    "NoIntersection",
    "ParseError",
    "SchwarzError",
    "Skeleton",
    "TangentIntersection",
    "TooCloseToBoundary",
    "UnknownElement",
    "ZeroDenominator",
    "build_geometry",
    "build_skeletons",
    "exposure_fraction_2d",
    "partition_boundary",
]
