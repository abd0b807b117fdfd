from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from src.errors import MissingBarrierError
from src.grid.space_time import SpaceTimeGrid
from src.logging.run_logger import RunLogger
from src.problem.audits import audit_A3, sample_grid
from src.problem.models import ControlProblem
from src.problem.mollifier import mollify


@dataclass
class SmoothingReport:
    eps: float
    sup_error: float
    error_bound: float
    lipschitz_initial: float
    lipschitz_smoothed: float
    compatibility_constant: float
    barrier_norm: float
    clip_level: float
    boundary_max: float

    @property
    def passed(self) -> bool:
        return self.sup_error <= self.error_bound + 1e-12 and self.lipschitz_smoothed <= self.lipschitz_initial + 1e-6

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "sup_error": self.sup_error,
            "error_bound": self.error_bound,
            "lipschitz_initial": self.lipschitz_initial,
            "lipschitz_smoothed": self.lipschitz_smoothed,
            "compatibility_constant": self.compatibility_constant,
            "barrier_norm": self.barrier_norm,
            "clip_level": self.clip_level,
            "boundary_max": self.boundary_max,
            "passed": self.passed,
        }


def smooth_initial_data(
    p: ControlProblem,
    grid: SpaceTimeGrid,
    eps: float,
    logger: Optional[RunLogger] = None,
) -> tuple[Callable[[np.ndarray], np.ndarray], SmoothingReport]:
    """Clip the initial data inside a barrier-controlled strip, then mollify.

    The clipped data vanishes within 2*eps of the boundary, so the result
    matches the boundary data there exactly.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if p.barrier is None:
        raise MissingBarrierError(f"Problem '{p.name}' has no barrier function")

    fine = sample_grid(grid)
    pts = fine.points
    c1 = audit_A3(p, grid).sampled_max
    scale = c1 if c1 > 0.0 else 1.0
    zeta0 = scale * p.barrier(0.0, pts).value
    zeta_norm = float(np.max(np.abs(zeta0))) + _lipschitz(fine, zeta0)
    clip_level = 2.0 * zeta_norm * eps * (1.0 + 1e-9)

    lower = np.asarray(p.lower)
    upper = np.asarray(p.upper)

    def clipped(x: np.ndarray) -> np.ndarray:
        inside = np.all((x >= lower) & (x <= upper), axis=1)
        out = np.zeros(x.shape[0])
        xi = x[inside]
        g = p.initial_values(xi) - p.boundary_values(0.0, xi)
        out[inside] = np.maximum(np.maximum(g, 0.0) - clip_level, 0.0) + np.minimum(np.minimum(g, 0.0) + clip_level, 0.0)
        return out

    def psi_eps(x: np.ndarray) -> np.ndarray:
        pts_ = np.asarray(x, dtype=float).reshape(-1, p.dim)
        return mollify(clipped, pts_, eps) + p.boundary_values(0.0, pts_)

    smoothed = psi_eps(pts)
    original = p.initial_values(pts)
    lip0 = _lipschitz(fine, original)
    boundary = fine.boundary_indices
    report = SmoothingReport(
        eps=eps,
        sup_error=float(np.max(np.abs(original - smoothed))),
        error_bound=(lip0 + 2.0 * zeta_norm) * eps,
        lipschitz_initial=lip0,
        lipschitz_smoothed=_lipschitz(fine, smoothed),
        compatibility_constant=c1,
        barrier_norm=zeta_norm,
        clip_level=clip_level,
        boundary_max=float(np.max(np.abs(smoothed[boundary] - p.boundary_values(0.0, pts[boundary])))),
    )
    if logger is not None:
        logger.log_event("smoothing_completed", "initial-data", report.to_dict())
    return psi_eps, report


def _lipschitz(fine: SpaceTimeGrid, values: np.ndarray) -> float:
    shaped = values.reshape(fine.nodes_per_axis)
    return max(float(np.max(np.abs(np.diff(shaped, axis=axis)))) / fine.dx[axis] for axis in range(fine.dim))
