from __future__ import annotations

from typing import Any

import numpy as np

from src.errors import SchemeAssemblyError
from src.grid.space_time import SpaceTimeGrid
from src.problem.models import ControlProblem
from src.schemes.base import StencilScheme
from src.schemes.models import SchemeKind, StencilOperator, StencilRow


class KushnerDupuisScheme(StencilScheme):
    """Nearest-neighbour stencil: central second differences, sign-selected
    cross corners, and upwind drift."""

    kind = SchemeKind.KD

    def assemble(self, t: float, control_index: int, nodes: np.ndarray) -> StencilOperator:
        grid = self.grid
        if grid.dim > 2:
            raise SchemeAssemblyError(f"Kushner-Dupuis stencil supports dim <= 2, got {grid.dim}")
        alpha = self.controls[control_index]
        pts = grid.points[nodes]
        a = self.problem.diffusion(alpha, t, pts)
        b = self.problem.drift_at(alpha, t, pts)
        c = self.problem.discount_at(alpha, t, pts)
        h = grid.dx
        strides = grid.strides
        n = nodes.shape[0]

        offsets: list[tuple[int, ...]] = []
        weights: list[np.ndarray] = []
        for i in range(grid.dim):
            cross = sum(np.abs(a[:, i, j]) / (h[i] * h[j]) for j in range(grid.dim) if j != i)
            axis_weight = a[:, i, i] / h[i] ** 2 - cross
            unit = tuple(1 if k == i else 0 for k in range(grid.dim))
            offsets.append(unit)
            weights.append(axis_weight + np.maximum(b[:, i], 0.0) / h[i])
            offsets.append(tuple(-u for u in unit))
            weights.append(axis_weight + np.maximum(-b[:, i], 0.0) / h[i])
        if grid.dim == 2:
            a12 = a[:, 0, 1]
            corner = np.abs(a12) / (h[0] * h[1])
            for off, active in (
                ((1, 1), a12 > 0),
                ((-1, -1), a12 > 0),
                ((1, -1), a12 < 0),
                ((-1, 1), a12 < 0),
            ):
                offsets.append(off)
                weights.append(np.where(active, corner, 0.0))

        row_pos = np.tile(np.arange(n), len(offsets))
        cols = np.concatenate([nodes + sum(o * s for o, s in zip(off, strides)) for off in offsets])
        vals = np.concatenate(weights)
        center = np.sum(weights, axis=0) - c
        return self._finish(t, control_index, nodes, row_pos, cols, vals, center, c)


def assemble_kd(p: ControlProblem, grid: SpaceTimeGrid, t: float, control: Any, node: int) -> StencilRow:
    if control not in p.controls:
        raise SchemeAssemblyError(f"Unknown control {control!r}")
    return KushnerDupuisScheme(p, grid).row(t, p.controls.index(control), node)
