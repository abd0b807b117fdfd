from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from src.config.settings import HarnessConfig
from src.errors import ConfigError
from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.harness.fitting import (
    effective_order,
    fit_order,
    local_orders,
    monotone_within,
    optimal_refinement,
    theoretical_exponents,
)
from src.harness.models import ConvergenceReport, RungResult
from src.harness.rungs import TimeStepRule, gather_rungs, rung_grid, solver_config
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.solver.engine import HJBSolver

REFERENCE_FACTOR = 4


class _ErrorTracker:
    """Sup-norm error against the exact solution, accumulated level by level."""

    def __init__(self, problem: ControlProblem, grid: SpaceTimeGrid, margin: float) -> None:
        self.problem = problem
        self.points = grid.points
        self.inner = grid.distance_to_boundary(grid.points) > margin
        self.err_global = 0.0
        self.err_interior = 0.0

    def __call__(self, level: GridFunction, policy: np.ndarray) -> None:
        diff = np.abs(level.values - self.problem.exact_values(level.time, self.points))
        self.err_global = max(self.err_global, float(diff.max()))
        if self.inner.any():
            self.err_interior = max(self.err_interior, float(diff[self.inner].max()))


async def convergence_study(
    problem: ControlProblem,
    scheme: Union[SchemeKind, str],
    theta: float,
    ladder: Sequence[float],
    rule: TimeStepRule,
    config: Optional[HarnessConfig] = None,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> ConvergenceReport:
    """Error ladder against the exact solution, or against a 4x finer reference solve."""
    kind = SchemeKind(scheme)
    config = config or HarnessConfig()
    dxs = [float(dx) for dx in ladder]
    if len(dxs) < 2 or any(b >= a for a, b in zip(dxs, dxs[1:])):
        raise ConfigError(f"Convergence ladder must be strictly refining, got {dxs}")
    exact = problem.exact_solution is not None

    def run_rung(dx: float) -> RungResult:
        grid = rung_grid(problem, kind, theta, dx, rule, sl_config)
        cfg = solver_config(config, theta, store_stride=grid.n_steps)
        solver = HJBSolver(problem, build_scheme(kind, problem, grid, sl_config), cfg)
        if exact:
            tracker = _ErrorTracker(problem, grid, config.interior_margin)
            solver.solve(observer=tracker)
            err_global, err_interior = tracker.err_global, tracker.err_interior
        else:
            err_global, err_interior = _reference_errors(problem, kind, theta, grid, rule, config, sl_config, solver)
        if logger is not None:
            logger.log_event(
                "rung_completed",
                "convergence",
                {"dx": dx, "dt": grid.dt, "err_global": err_global, "err_interior": err_interior},
            )
        return RungResult(dx=dx, dt=grid.dt, err_global=err_global, err_interior=err_interior)

    rungs = await gather_rungs(run_rung, dxs)
    errors = [r.err_global for r in rungs]
    for rung, order in zip(rungs, local_orders(dxs, errors)):
        rung.order = order

    power = fit_order(dxs, [r.dt for r in rungs], tail=len(rungs))
    exponents = theoretical_exponents(kind, theta)
    report = ConvergenceReport(
        problem=problem.name,
        scheme=kind.value,
        theta=theta,
        rungs=rungs,
        fitted_order=fit_order(dxs, errors),
        fitted_order_interior=fit_order(dxs, [r.err_interior for r in rungs]),
        refinement_power=power,
        lower_exponents=exponents["lower"],
        upper_exponents=exponents["upper"],
        lower_order=effective_order(exponents["lower"], power),
        upper_order=effective_order(exponents["upper"], power),
        monotone=monotone_within(errors),
        reference="exact" if exact else "reference",
        refinement=optimal_refinement(theta),
    )
    if logger is not None:
        logger.log_event("study_completed", "convergence", report.to_dict())
    return report


def _reference_errors(
    problem: ControlProblem,
    kind: SchemeKind,
    theta: float,
    grid: SpaceTimeGrid,
    rule: TimeStepRule,
    config: HarnessConfig,
    sl_config: Optional[SLConfig],
    solver: HJBSolver,
) -> tuple[float, float]:
    """Final-time errors on the coarse nodes against a solve 4x finer in space."""
    fine_grid = rung_grid(problem, kind, theta, grid.dx_min / REFERENCE_FACTOR, rule, sl_config)
    fine_cfg = solver_config(config, theta, store_stride=fine_grid.n_steps)
    fine = HJBSolver(problem, build_scheme(kind, problem, fine_grid, sl_config), fine_cfg).solve().final
    coarse = solver.solve().final
    every = tuple(slice(None, None, REFERENCE_FACTOR) for _ in range(grid.dim))
    sliced = fine.values.reshape(fine_grid.nodes_per_axis)[every]
    diff = np.abs(coarse.values - sliced.reshape(-1))
    inner = grid.distance_to_boundary(grid.points) > config.interior_margin
    return float(diff.max()), float(diff[inner].max()) if inner.any() else 0.0
