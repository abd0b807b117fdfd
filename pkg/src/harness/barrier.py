from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from src.config.settings import HarnessConfig
from src.errors import MissingBarrierError
from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.harness.models import BarrierReport, BarrierRung
from src.harness.rungs import TimeStepRule, gather_rungs, rung_grid, solver_config
from src.logging.run_logger import RunLogger
from src.problem.audits import audit_A2
from src.problem.models import ControlProblem
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.solver.engine import HJBSolver


class _BarrierRatio:
    """max over interior nodes and levels t > 0 of |u_h - psi1| / zeta."""

    def __init__(self, problem: ControlProblem, grid: SpaceTimeGrid) -> None:
        self.problem = problem
        self.points = grid.points[grid.interior_indices]
        self.interior = grid.interior_indices
        self.K = 0.0

    def __call__(self, level: GridFunction, policy: np.ndarray) -> None:
        if level.time_level == 0:
            return
        zeta = self.problem.barrier(level.time, self.points).value
        gap = np.abs(level.values[self.interior] - self.problem.boundary_values(level.time, self.points))
        positive = zeta > 0.0
        if np.any(gap[~positive] > 0.0):
            self.K = np.inf
            return
        if positive.any():
            self.K = max(self.K, float(np.max(gap[positive] / zeta[positive])))


async def barrier_audit(
    problem: ControlProblem,
    scheme: Union[SchemeKind, str],
    theta: float,
    ladder: Sequence[float],
    rule: TimeStepRule,
    config: Optional[HarnessConfig] = None,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> BarrierReport:
    """Fit the barrier constant K on every rung; the control is h-uniform when K stays within a factor 2."""
    kind = SchemeKind(scheme)
    config = config or HarnessConfig()
    if problem.barrier is None:
        raise MissingBarrierError(f"Problem '{problem.name}' has no barrier; the audit cannot run")
    coarse = rung_grid(problem, kind, theta, max(ladder), rule, sl_config)
    a2 = audit_A2(problem, coarse, config.audit_samples, seed=config.seed, logger=logger)
    if not a2.passed:
        raise MissingBarrierError(f"Barrier of '{problem.name}' fails A2 (sampled max {a2.sampled_max:.4g})")

    def run_rung(dx: float) -> BarrierRung:
        grid = rung_grid(problem, kind, theta, dx, rule, sl_config)
        ratio = _BarrierRatio(problem, grid)
        cfg = solver_config(config, theta, store_stride=grid.n_steps)
        HJBSolver(problem, build_scheme(kind, problem, grid, sl_config), cfg).solve(observer=ratio)
        mismatch = _initial_mismatch(problem, grid, ratio.K)
        if logger is not None:
            logger.log_event("rung_completed", "barrier", {"dx": dx, "K": ratio.K, "mismatch": mismatch})
        return BarrierRung(dx=dx, dt=grid.dt, K=ratio.K, mismatch=mismatch)

    rungs = await gather_rungs(run_rung, [float(dx) for dx in ladder])
    report = BarrierReport(
        problem=problem.name,
        scheme=kind.value,
        rungs=rungs,
        continuous_K=_continuous_constant(problem, rung_grid(problem, kind, theta, min(ladder), rule, sl_config)),
    )
    if logger is not None:
        logger.log_event("study_completed", "barrier", report.to_dict())
    return report


def _initial_mismatch(problem: ControlProblem, grid: SpaceTimeGrid, K: float) -> float:
    """sup over the parabolic boundary of (|u_h - psi1| - K zeta)^+; lateral nodes carry psi1 exactly."""
    if not np.isfinite(K):
        return np.inf
    pts = grid.points
    gap = np.abs(problem.initial_values(pts) - problem.boundary_values(0.0, pts))
    excess = gap - K * problem.barrier(0.0, pts).value
    return float(max(0.0, excess.max()))


def _continuous_constant(problem: ControlProblem, grid: SpaceTimeGrid) -> Optional[float]:
    if problem.exact_solution is None:
        return None
    pts = grid.points[grid.interior_indices]
    best = 0.0
    for t in np.linspace(0.0, problem.horizon, 17)[1:]:
        zeta = problem.barrier(float(t), pts).value
        gap = np.abs(problem.exact_values(float(t), pts) - problem.boundary_values(float(t), pts))
        positive = zeta > 0.0
        if positive.any():
            best = max(best, float(np.max(gap[positive] / zeta[positive])))
    return best
