from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from typing import Any, ClassVar, Optional

import numpy as np
from scipy import sparse

from src.errors import SchemeAssemblyError
from src.grid.space_time import SpaceTimeGrid
from src.problem.models import ControlProblem
from src.schemes.models import SchemeKind, StencilOperator, StencilRow

# Time-dependent coefficients keep assembled operators for this many time levels.
_LEVELS_KEPT = 2


class StencilScheme(ABC):
    kind: ClassVar[SchemeKind]

    def __init__(self, problem: ControlProblem, grid: SpaceTimeGrid) -> None:
        if problem.dim != grid.dim:
            raise SchemeAssemblyError(f"Problem dimension {problem.dim} does not match grid dimension {grid.dim}")
        self.problem = problem
        self.grid = grid
        self._cache: dict[tuple[Optional[float], int], StencilOperator] = {}
        self._times: list[float] = []
        self._lock = threading.Lock()

    @property
    def controls(self) -> tuple[Any, ...]:
        return self.problem.controls

    def operator(self, t: float, control_index: int) -> StencilOperator:
        key = (None if self.problem.time_homogeneous else t, control_index)
        with self._lock:
            op = self._cache.get(key)
        if op is None:
            op = self.assemble(t, control_index, self.grid.interior_indices)
            with self._lock:
                self._remember(key, op)
        if op.time != t:
            alpha = self.controls[control_index]
            op = op.at_time(t, self.problem.cost_at(alpha, t, self.grid.points[op.rows]))
        return op

    def operators(self, t: float) -> list[StencilOperator]:
        return [self.operator(t, k) for k in range(len(self.controls))]

    def row(self, t: float, control_index: int, node: int) -> StencilRow:
        if self.grid.boundary_mask[node]:
            raise SchemeAssemblyError(f"Node {node} is not interior")
        return self.assemble(t, control_index, np.array([node], dtype=np.int64)).row(0)

    @abstractmethod
    def assemble(self, t: float, control_index: int, nodes: np.ndarray) -> StencilOperator:
        raise NotImplementedError

    def _remember(self, key: tuple[Optional[float], int], op: StencilOperator) -> None:
        if key in self._cache:
            return
        t = key[0]
        if t is not None and t not in self._times:
            self._times.append(t)
            while len(self._times) > _LEVELS_KEPT:
                stale = self._times.pop(0)
                for k in [k for k in self._cache if k[0] == stale]:
                    del self._cache[k]
        self._cache[key] = op

    def _finish(
        self,
        t: float,
        control_index: int,
        nodes: np.ndarray,
        row_pos: np.ndarray,
        cols: np.ndarray,
        vals: np.ndarray,
        center: np.ndarray,
        discount: np.ndarray,
        boundary_rows: Optional[np.ndarray] = None,
        boundary_points: Optional[np.ndarray] = None,
        boundary_weights: Optional[np.ndarray] = None,
    ) -> StencilOperator:
        """Fold weight that lands on the center node, drop zeros, and pack as CSR."""
        on_center = cols == nodes[row_pos]
        if on_center.any():
            center = center - np.bincount(row_pos[on_center], weights=vals[on_center], minlength=nodes.shape[0])
        keep = (~on_center) & (vals != 0.0)
        weights = sparse.csr_matrix(
            (vals[keep], (row_pos[keep], cols[keep])),
            shape=(nodes.shape[0], self.grid.n_nodes),
        )
        weights.sum_duplicates()
        alpha = self.controls[control_index]
        pts = self.grid.points[nodes]
        if boundary_rows is None or boundary_rows.shape[0] == 0:
            boundary_rows = np.zeros(0, dtype=np.int64)
            boundary_points = np.zeros((0, self.grid.dim))
            boundary_weights = np.zeros(0)
        return StencilOperator(
            grid=self.grid,
            control=alpha,
            control_index=control_index,
            time=t,
            rows=np.asarray(nodes, dtype=np.int64),
            center=center,
            weights=weights,
            discount=discount,
            constant=self.problem.cost_at(alpha, t, pts),
            boundary_rows=boundary_rows,
            boundary_points=boundary_points,
            boundary_weights=boundary_weights,
        )
