"""Weighted independent range sampling (wIRS) for 1D intervals and 3D halfspaces."""

from .core import AliasTable, Dataset, RandomSource, WeightedPoint, alias_build, alias_sample
from .geom3d import HalfspaceQuery, Orientation, Plane

__all__ = [
    "AliasTable",
    "Dataset",
    "HalfspaceQuery",
    "Orientation",
    "Plane",
    "RandomSource",
    "WeightedPoint",
    "alias_build",
    "alias_sample",
]
__version__ = "0.1.0"
