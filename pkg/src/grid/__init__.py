from src.grid.space_time import (
    GridFunction,
    NodeClass,
    SpaceTimeGrid,
    build_grid,
    distance_to_boundary,
    interpolate,
)

__all__ = [
    "GridFunction",
    "NodeClass",
    "SpaceTimeGrid",
    "build_grid",
    "distance_to_boundary",
    "interpolate",
]
