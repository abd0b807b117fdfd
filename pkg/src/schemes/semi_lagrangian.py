from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np

from src.errors import SchemeAssemblyError
from src.grid.space_time import SpaceTimeGrid
from src.problem.models import ControlProblem
from src.schemes.base import StencilScheme
from src.schemes.models import SchemeKind, SLConfig, StencilOperator, StencilRow
from src.schemes.positivity import explicit_step_bound

# Exit parameters within this relative distance of the full leg count as untruncated.
_TRUNCATION_TOL = 1e-12


class SemiLagrangianScheme(StencilScheme):
    """Linear-interpolation semi-Lagrangian stencil, truncated at the boundary.

    Each diffusion column sigma_j contributes a leg pair x +/- s*sigma_j with
    s = sqrt(h_s); drift uses x + h_s*b. Legs that would leave the box stop at
    the exact boundary intersection and get asymmetric weights.
    """

    kind = SchemeKind.SL

    def __init__(self, problem: ControlProblem, grid: SpaceTimeGrid, config: Optional[SLConfig] = None) -> None:
        super().__init__(problem, grid)
        self.config = config or SLConfig()
        self.stencil_step = self.config.step_for(grid)

    def assemble(self, t: float, control_index: int, nodes: np.ndarray) -> StencilOperator:
        grid = self.grid
        alpha = self.controls[control_index]
        pts = grid.points[nodes]
        sigma = self.problem.sigma_at(alpha, t, pts)
        b = self.problem.drift_at(alpha, t, pts)
        c = self.problem.discount_at(alpha, t, pts)
        n = nodes.shape[0]
        hs = self.stencil_step
        s_full = math.sqrt(hs)

        center = -c.copy()
        legs: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []  # rows, points, weights, truncated

        for j in range(sigma.shape[2]):
            v = sigma[:, :, j]
            active = np.linalg.norm(v, axis=1) > 0.0
            if not active.any():
                continue
            rows = np.flatnonzero(active)
            x, va = pts[rows], v[rows]
            s_plus, cut_plus = self._leg_length(x, va, s_full)
            s_minus, cut_minus = self._leg_length(x, -va, s_full)
            if np.any(s_plus <= 0.0) or np.any(s_minus <= 0.0):
                raise SchemeAssemblyError(f"Zero-length diffusion leg at control {alpha!r}, column {j}")
            w_plus, w_minus, w_center = leg_weights(s_plus, s_minus)
            center[rows] += w_center
            legs.append((rows, x + s_plus[:, None] * va, w_plus, cut_plus))
            legs.append((rows, x - s_minus[:, None] * va, w_minus, cut_minus))

        moving = np.linalg.norm(b, axis=1) > 0.0
        if moving.any():
            rows = np.flatnonzero(moving)
            x, vb = pts[rows], b[rows]
            s_b, cut_b = self._leg_length(x, vb, hs)
            if np.any(s_b <= 0.0):
                raise SchemeAssemblyError(f"Zero-length drift leg at control {alpha!r}")
            center[rows] += 1.0 / s_b
            legs.append((rows, x + s_b[:, None] * vb, 1.0 / s_b, cut_b))

        lower = np.asarray(grid.lower)
        upper = np.asarray(grid.upper)
        row_parts, col_parts, val_parts = [], [], []
        b_rows, b_pts, b_wts = [], [], []
        for rows, targets, w, cut in legs:
            targets = np.clip(targets, lower, upper)
            if cut.any():
                b_rows.append(rows[cut])
                b_pts.append(targets[cut])
                b_wts.append(w[cut])
            keep = ~cut
            if keep.any():
                idx, lin = grid.interpolation_weights(targets[keep])
                row_parts.append(np.repeat(rows[keep], idx.shape[1]))
                col_parts.append(idx.ravel())
                val_parts.append((lin * w[keep][:, None]).ravel())

        row_pos = np.concatenate(row_parts) if row_parts else np.zeros(0, dtype=np.int64)
        cols = np.concatenate(col_parts) if col_parts else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(val_parts) if val_parts else np.zeros(0)
        return self._finish(
            t,
            control_index,
            nodes,
            row_pos,
            cols,
            vals,
            center,
            c,
            boundary_rows=np.concatenate(b_rows) if b_rows else None,
            boundary_points=np.concatenate(b_pts) if b_pts else None,
            boundary_weights=np.concatenate(b_wts) if b_wts else None,
        )

    def leg_scale(self, t: float) -> np.ndarray:
        """kappa per interior node: largest column norm of sigma over controls."""
        pts = self.grid.points[self.grid.interior_indices]
        norms = [np.linalg.norm(self.problem.sigma_at(alpha, t, pts), axis=1).max(axis=1) for alpha in self.controls]
        return np.max(norms, axis=0)

    def near_boundary(self, t: float) -> np.ndarray:
        """Mask over interior nodes whose diffusion legs reach the boundary."""
        pts = self.grid.points[self.grid.interior_indices]
        return self.grid.distance_to_boundary(pts) <= math.sqrt(self.stencil_step) * self.leg_scale(t)

    def _leg_length(self, x: np.ndarray, direction: np.ndarray, s_full: float) -> tuple[np.ndarray, np.ndarray]:
        exit_s = _exit_parameter(self.grid, x, direction)
        cut = exit_s < s_full * (1.0 - _TRUNCATION_TOL)
        return np.where(cut, exit_s, s_full), cut


def leg_weights(s_plus: np.ndarray, s_minus: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half of the three-point second difference on an uneven pair.

    Returns (plus weight, minus weight, center weight); equals
    (1/(2h), 1/(2h), 1/h) when both legs are sqrt(h).
    """
    total = s_plus + s_minus
    return 1.0 / (s_plus * total), 1.0 / (s_minus * total), 1.0 / (s_plus * s_minus)


def _exit_parameter(grid: SpaceTimeGrid, x: np.ndarray, direction: np.ndarray) -> np.ndarray:
    exit_s = np.full(x.shape[0], np.inf)
    for axis in range(grid.dim):
        v = direction[:, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(v > 0, (grid.upper[axis] - x[:, axis]) / v, np.inf)
            down = np.where(v < 0, (grid.lower[axis] - x[:, axis]) / v, np.inf)
        exit_s = np.minimum(exit_s, np.minimum(up, down))
    return exit_s


def assemble_sl(
    p: ControlProblem,
    grid: SpaceTimeGrid,
    t: float,
    control: Any,
    node: int,
    cfg: Optional[SLConfig] = None,
) -> StencilRow:
    if control not in p.controls:
        raise SchemeAssemblyError(f"Unknown control {control!r}")
    return SemiLagrangianScheme(p, grid, cfg).row(t, p.controls.index(control), node)


def cfl_bound(p: ControlProblem, grid: SpaceTimeGrid, cfg: SLConfig) -> float:
    if cfg.theta >= 1.0:
        return math.inf
    return explicit_step_bound(SemiLagrangianScheme(p, grid, cfg), cfg.theta)


def recommended_time_step(p: ControlProblem, grid: SpaceTimeGrid, cfg: SLConfig) -> float:
    bound = cfl_bound(p, grid, cfg)
    if cfg.cfl_constant is None:
        return bound
    return min(bound, cfg.cfl_constant * (1.0 - cfg.theta) * grid.dx_min**1.5)


def consistency_error_model(dt: float, dx: float, eps: float, theta: float, K: float, C: float) -> float:
    if not (dt > 0 and dx > 0 and eps > 0):
        raise ValueError(f"dt, dx and eps must be positive, got dt={dt}, dx={dx}, eps={eps}")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return C * K * (abs(1.0 - 2.0 * theta) * dt * eps**-3 + dt**2 * eps**-5 + dx * eps**-3)
