from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Optional, Union

import numpy as np
from scipy import sparse

from src.grid.space_time import SpaceTimeGrid


class SchemeKind(str, Enum):
    KD = "kd"
    SL = "sl"


@dataclass(frozen=True)
class BoundaryTarget:
    point: tuple[float, ...]
    time: float


StencilTarget = Union[int, BoundaryTarget]

_WEIGHT_DERIVED = ("off_weight_sum", "min_off_weight", "interior_block", "boundary_block")


@dataclass(frozen=True)
class StencilRow:
    """L_h[phi](center) = center_weight*phi(center) - sum w_i*phi(target_i) - constant."""

    center: int
    control: Any
    time: float
    center_weight: float
    constant: float
    discount: float
    node_entries: tuple[tuple[int, float], ...]
    boundary_entries: tuple[tuple[tuple[float, ...], float], ...] = ()

    @property
    def entries(self) -> tuple[tuple[StencilTarget, float], ...]:
        nodes = [(idx, w) for idx, w in self.node_entries]
        bnd = [(BoundaryTarget(point=pt, time=self.time), w) for pt, w in self.boundary_entries]
        return tuple(nodes + bnd)

    @property
    def off_weight_sum(self) -> float:
        return float(sum(w for _, w in self.node_entries) + sum(w for _, w in self.boundary_entries))

    def apply(self, values: np.ndarray, boundary: Callable[[np.ndarray], np.ndarray]) -> float:
        """Row value on node values plus a boundary evaluator for exact boundary targets."""
        total = self.center_weight * float(values[self.center]) - self.constant
        total -= sum(w * float(values[idx]) for idx, w in self.node_entries)
        if self.boundary_entries:
            pts = np.array([pt for pt, _ in self.boundary_entries], dtype=float)
            bvals = boundary(pts)
            total -= float(np.dot([w for _, w in self.boundary_entries], bvals))
        return total


@dataclass(frozen=True, eq=False)
class StencilOperator:
    """All interior rows for one (time, control), stored as sparse blocks.

    `weights` maps interior rows to node columns; exact boundary targets are
    kept separately as (row position, point, weight) triples.
    """

    grid: SpaceTimeGrid
    control: Any
    control_index: int
    time: float
    rows: np.ndarray
    center: np.ndarray
    weights: sparse.csr_matrix
    discount: np.ndarray
    constant: np.ndarray
    boundary_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    boundary_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    boundary_weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    @property
    def has_boundary_targets(self) -> bool:
        return self.boundary_rows.shape[0] > 0

    def at_time(self, time: float, constant: np.ndarray) -> StencilOperator:
        moved = replace(self, time=time, constant=constant)
        # Weights are unchanged, so the derived blocks carry over.
        for name in _WEIGHT_DERIVED:
            if name in self.__dict__:
                moved.__dict__[name] = self.__dict__[name]
        return moved

    def apply(self, values: np.ndarray, boundary_values: Optional[np.ndarray] = None) -> np.ndarray:
        out = self.center * values[self.rows] - self.weights @ values - self.constant
        if self.has_boundary_targets:
            if boundary_values is None:
                raise ValueError("Operator has exact boundary targets; boundary values are required")
            out -= self.boundary_sum(boundary_values)
        return out

    def boundary_sum(self, boundary_values: np.ndarray) -> np.ndarray:
        if not self.has_boundary_targets:
            return np.zeros(self.n_rows)
        return np.bincount(self.boundary_rows, weights=self.boundary_weights * boundary_values, minlength=self.n_rows)

    @cached_property
    def off_weight_sum(self) -> np.ndarray:
        total = np.asarray(self.weights.sum(axis=1)).reshape(-1)
        if self.has_boundary_targets:
            total = total + np.bincount(self.boundary_rows, weights=self.boundary_weights, minlength=self.n_rows)
        return total

    @cached_property
    def min_off_weight(self) -> tuple[float, int]:
        """Smallest off-center weight and the row position holding it (inf, -1 when empty)."""
        best, where = np.inf, -1
        coo = self.weights.tocoo()
        if coo.nnz:
            k = int(np.argmin(coo.data))
            best, where = float(coo.data[k]), int(coo.row[k])
        if self.has_boundary_targets:
            k = int(np.argmin(self.boundary_weights))
            if self.boundary_weights[k] < best:
                best, where = float(self.boundary_weights[k]), int(self.boundary_rows[k])
        return best, where

    @cached_property
    def interior_block(self) -> sparse.csr_matrix:
        return self.weights[:, self.grid.interior_indices].tocsr()

    @cached_property
    def boundary_block(self) -> sparse.csr_matrix:
        return self.weights[:, self.grid.boundary_indices].tocsr()

    def row(self, position: int) -> StencilRow:
        start, stop = self.weights.indptr[position], self.weights.indptr[position + 1]
        node_entries = tuple(
            (int(col), float(w)) for col, w in zip(self.weights.indices[start:stop], self.weights.data[start:stop])
        )
        mask = self.boundary_rows == position
        boundary_entries = tuple(
            (tuple(float(v) for v in pt), float(w))
            for pt, w in zip(self.boundary_points[mask], self.boundary_weights[mask])
        )
        return StencilRow(
            center=int(self.rows[position]),
            control=self.control,
            time=self.time,
            center_weight=float(self.center[position]),
            constant=float(self.constant[position]),
            discount=float(self.discount[position]),
            node_entries=node_entries,
            boundary_entries=boundary_entries,
        )


@dataclass(frozen=True)
class SLConfig:
    theta: float = 1.0
    stencil_step: Optional[float] = None
    cfl_constant: Optional[float] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.stencil_step is not None and not self.stencil_step > 0:
            raise ValueError(f"stencil_step must be positive, got {self.stencil_step}")
        if self.cfl_constant is not None and not self.cfl_constant > 0:
            raise ValueError(f"cfl_constant must be positive, got {self.cfl_constant}")

    def step_for(self, grid: SpaceTimeGrid) -> float:
        return self.stencil_step if self.stencil_step is not None else grid.dx_min


@dataclass
class PositivityReport:
    passed: bool
    dt: float
    theta: float
    min_off_weight: float
    min_explicit_coefficient: float
    min_implicit_margin: float
    rows_checked: int
    violation: Optional[dict[str, Any]] = None

    @property
    def slack(self) -> float:
        return min(self.min_off_weight, self.min_explicit_coefficient, self.min_implicit_margin)

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "dt": self.dt,
            "theta": self.theta,
            "min_off_weight": self.min_off_weight,
            "min_explicit_coefficient": self.min_explicit_coefficient,
            "min_implicit_margin": self.min_implicit_margin,
            "rows_checked": self.rows_checked,
            "violation": self.violation,
        }
