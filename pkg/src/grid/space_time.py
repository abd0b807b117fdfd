from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from src.errors import DomainError

# Points this close (relative to the extent) outside the box count as on it.
_CLOSURE_TOL = 1e-12


class NodeClass(str, Enum):
    INTERIOR = "interior"
    SPATIAL_BOUNDARY = "spatial-boundary"


@dataclass(frozen=True)
class SpaceTimeGrid:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    nodes_per_axis: tuple[int, ...]
    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        dim = len(self.lower)
        if len(self.upper) != dim or len(self.nodes_per_axis) != dim:
            raise ValueError(
                f"Dimension mismatch: lower={len(self.lower)}, upper={len(self.upper)}, "
                f"nodes_per_axis={len(self.nodes_per_axis)}"
            )
        if dim not in (1, 2):
            raise ValueError(f"Only dim 1 or 2 is supported, got {dim}")
        for axis, (lo, hi, n) in enumerate(zip(self.lower, self.upper, self.nodes_per_axis)):
            if not hi > lo:
                raise ValueError(f"Non-positive extent on axis {axis}: lower={lo}, upper={hi}")
            if n < 3:
                raise ValueError(f"Axis {axis} needs at least 3 nodes, got {n}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def dx(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.lower, self.upper, self.nodes_per_axis))

    @property
    def dx_min(self) -> float:
        return min(self.dx)

    @property
    def horizon(self) -> float:
        return self.dt * self.n_steps

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @property
    def n_levels(self) -> int:
        return self.n_steps + 1

    def time(self, level: int) -> float:
        return level * self.dt

    @cached_property
    def strides(self) -> tuple[int, ...]:
        strides = [1] * self.dim
        for axis in range(self.dim - 2, -1, -1):
            strides[axis] = strides[axis + 1] * self.nodes_per_axis[axis + 1]
        return tuple(strides)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            lo + (hi - lo) * np.arange(n) / (n - 1)
            for lo, hi, n in zip(self.lower, self.upper, self.nodes_per_axis)
        )

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        multi = np.unravel_index(np.arange(self.n_nodes), self.nodes_per_axis)
        mask = np.zeros(self.n_nodes, dtype=bool)
        for axis, idx in enumerate(multi):
            mask |= (idx == 0) | (idx == self.nodes_per_axis[axis] - 1)
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior_indices(self) -> np.ndarray:
        idx = np.flatnonzero(~self.boundary_mask)
        idx.setflags(write=False)
        return idx

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        idx = np.flatnonzero(self.boundary_mask)
        idx.setflags(write=False)
        return idx

    def node_class(self, index: int) -> NodeClass:
        self._check_index(index)
        return NodeClass.SPATIAL_BOUNDARY if self.boundary_mask[index] else NodeClass.INTERIOR

    def is_initial(self, level: int) -> bool:
        return level == 0

    def on_parabolic_boundary(self, level: int, index: int) -> bool:
        return self.is_initial(level) or self.node_class(index) is NodeClass.SPATIAL_BOUNDARY

    def index_to_point(self, index: int) -> np.ndarray:
        self._check_index(index)
        return self.points[index].copy()

    def point_to_index(self, point: Sequence[float]) -> int:
        x = np.asarray(point, dtype=float).reshape(self.dim)
        multi = []
        for axis in range(self.dim):
            k = int(round((x[axis] - self.lower[axis]) / self.dx[axis]))
            if k < 0 or k >= self.nodes_per_axis[axis] or abs(self.axes[axis][k] - x[axis]) > 1e-9 * self.dx[axis]:
                raise DomainError(f"Point {x.tolist()} is not a grid node")
            multi.append(k)
        return int(np.ravel_multi_index(tuple(multi), self.nodes_per_axis))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = self._as_points(points)
        inside = np.ones(pts.shape[0], dtype=bool)
        for axis in range(self.dim):
            tol = _CLOSURE_TOL * max(1.0, self.upper[axis] - self.lower[axis])
            inside &= (pts[:, axis] >= self.lower[axis] - tol) & (pts[:, axis] <= self.upper[axis] + tol)
        return inside

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        pts = self._require_inside(points)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        dist = np.minimum(pts - lo, hi - pts).min(axis=1)
        return np.maximum(dist, 0.0)

    def interpolation_weights(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Multilinear weights on the 2^dim corners of the cell holding each point.

        Returns (indices, weights), both shaped (n_points, 2**dim).
        """
        pts = self._require_inside(points)
        n = pts.shape[0]
        base = np.zeros((n, self.dim), dtype=np.int64)
        frac = np.zeros((n, self.dim))
        for axis in range(self.dim):
            r = (pts[:, axis] - self.lower[axis]) / self.dx[axis]
            nearest = np.round(r)
            r = np.where(np.abs(r - nearest) < 1e-10, nearest, r)
            k = np.clip(np.floor(r).astype(np.int64), 0, self.nodes_per_axis[axis] - 2)
            base[:, axis] = k
            frac[:, axis] = np.clip(r - k, 0.0, 1.0)

        corners = list(itertools.product((0, 1), repeat=self.dim))
        indices = np.zeros((n, len(corners)), dtype=np.int64)
        weights = np.ones((n, len(corners)))
        for c, bits in enumerate(corners):
            for axis, bit in enumerate(bits):
                indices[:, c] += (base[:, axis] + bit) * self.strides[axis]
                weights[:, c] *= frac[:, axis] if bit else 1.0 - frac[:, axis]
        return indices, weights

    def refine(self, factor: int, time_factor: int = 1) -> SpaceTimeGrid:
        if factor < 1 or time_factor < 1:
            raise ValueError("Refinement factors must be >= 1")
        return replace(
            self,
            nodes_per_axis=tuple((n - 1) * factor + 1 for n in self.nodes_per_axis),
            dt=self.dt / time_factor,
            n_steps=self.n_steps * time_factor,
        )

    def _as_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim) if self.dim > 1 else pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"Expected points of shape (n, {self.dim}), got {np.shape(points)}")
        return pts

    def _require_inside(self, points: np.ndarray) -> np.ndarray:
        pts = self._as_points(points)
        inside = self.contains(pts)
        if not inside.all():
            bad = pts[np.flatnonzero(~inside)[0]]
            raise DomainError(f"Point {bad.tolist()} lies outside the closed domain")
        return np.clip(pts, np.asarray(self.lower), np.asarray(self.upper))

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.n_nodes:
            raise IndexError(f"Node index {index} out of range [0, {self.n_nodes})")


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: SpaceTimeGrid
    time_level: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if values.shape[0] != self.grid.n_nodes:
            raise ValueError(f"Expected {self.grid.n_nodes} values, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"Grid function at level {self.time_level} has non-finite values")
        if not 0 <= self.time_level <= self.grid.n_steps:
            raise ValueError(f"Time level {self.time_level} outside [0, {self.grid.n_steps}]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def time(self) -> float:
        return self.grid.time(self.time_level)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def lipschitz_estimate(self) -> float:
        shaped = self.values.reshape(self.grid.nodes_per_axis)
        quotients = [
            float(np.max(np.abs(np.diff(shaped, axis=axis)))) / self.grid.dx[axis] for axis in range(self.grid.dim)
        ]
        return max(quotients)

    def with_values(self, values: np.ndarray) -> GridFunction:
        return GridFunction(grid=self.grid, time_level=self.time_level, values=values)


def build_grid(
    lower: Sequence[float],
    upper: Sequence[float],
    nodes_per_axis: Sequence[int],
    dt: float,
    n_steps: int,
) -> SpaceTimeGrid:
    return SpaceTimeGrid(
        lower=tuple(float(v) for v in lower),
        upper=tuple(float(v) for v in upper),
        nodes_per_axis=tuple(int(n) for n in nodes_per_axis),
        dt=float(dt),
        n_steps=int(n_steps),
    )


def distance_to_boundary(grid: SpaceTimeGrid, x: Sequence[float]) -> float:
    return float(grid.distance_to_boundary(np.asarray(x, dtype=float).reshape(1, grid.dim))[0])


def interpolate(f: GridFunction, x: Sequence[float]) -> tuple[float, list[tuple[int, float]]]:
    indices, weights = f.grid.interpolation_weights(np.asarray(x, dtype=float).reshape(1, f.grid.dim))
    support = [(int(i), float(w)) for i, w in zip(indices[0], weights[0]) if w > 0.0]
    value = float(sum(w * f.values[i] for i, w in support))
    return value, support
