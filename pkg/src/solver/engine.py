from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse

from src.errors import CFLViolationError, NonMonotoneSchemeError
from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem
from src.schemes.base import StencilScheme
from src.schemes.models import PositivityReport, StencilOperator
from src.schemes.positivity import check_positive_type
from src.solver.howard import howard_solve
from src.solver.models import PolicySystem, SolveDiagnostics, Solution, SolverConfig, StepResult

# (level, policy over interior nodes) after every completed step.
Observer = Callable[[GridFunction, np.ndarray], None]
BoundaryEvaluator = Callable[[np.ndarray], np.ndarray]


class HJBSolver:
    """Theta-scheme time marching for one stencil scheme.

    Level 0 is psi0 on every node; later levels pin boundary nodes to psi1
    and solve the interior by an explicit min (theta = 0) or by Howard.
    """

    def __init__(
        self,
        problem: ControlProblem,
        scheme: StencilScheme,
        config: SolverConfig,
        logger: Optional[RunLogger] = None,
    ) -> None:
        self.problem = problem
        self.scheme = scheme
        self.grid: SpaceTimeGrid = scheme.grid
        self.config = config
        self.logger = logger
        self.positivity: Optional[PositivityReport] = None
        self._checked_times: set[Optional[float]] = set()
        self._psi_max = 0.0
        self._cost_max = 0.0
        self._growth = 0.0

    def initial_level(self) -> GridFunction:
        values = self.problem.initial_values(self.grid.points)
        self._psi_max = max(self._psi_max, float(np.max(np.abs(values))))
        return GridFunction(grid=self.grid, time_level=0, values=values)

    def boundary_evaluator(self, level: int) -> BoundaryEvaluator:
        if level == 0:
            return self.problem.initial_values
        t = self.grid.time(level)
        return lambda pts: self.problem.boundary_values(t, pts)

    def step(self, previous: GridFunction, controls: Optional[Sequence[int]] = None) -> StepResult:
        grid = self.grid
        theta = self.config.theta
        dt = grid.dt
        n = previous.time_level + 1
        if n > grid.n_steps:
            raise ValueError(f"Cannot step past the final level {grid.n_steps}")
        t0, t1 = grid.time(n - 1), grid.time(n)
        chosen = list(range(len(self.problem.controls))) if controls is None else list(controls)

        values = np.empty(grid.n_nodes)
        bnd = grid.boundary_indices
        values[bnd] = self.problem.boundary_values(t1, grid.points[bnd])
        self._psi_max = max(self._psi_max, float(np.max(np.abs(values[bnd]))))

        old_ops = [self.scheme.operator(t0, k) for k in chosen] if theta < 1.0 else []
        new_ops = [self.scheme.operator(t1, k) for k in chosen] if theta > 0.0 else []
        self._track_coefficients(old_ops + new_ops)
        self._check_positivity(t0, old_ops + new_ops)

        u_old = previous.values
        u_int = u_old[grid.interior_indices]
        old_terms = [op.apply(u_old, self._boundary_values(op, n - 1)) for op in old_ops]

        if theta == 0.0:
            explicit = np.stack([u_int - dt * term for term in old_terms])
            policy = np.argmin(explicit, axis=0)
            values[grid.interior_indices] = explicit[policy, np.arange(explicit.shape[1])]
            result = None
        else:
            system = self._policy_system(values, new_ops, old_terms, u_int, n)
            result = howard_solve(system, self.config, initial=u_int)
            policy = result.policy
            values[grid.interior_indices] = result.values

        level = GridFunction(grid=grid, time_level=n, values=values)
        return StepResult(level=level, policy=np.asarray(chosen)[policy], howard=result)

    def solve(self, observer: Optional[Observer] = None) -> Solution:
        grid = self.grid
        cfg = self.config
        diagnostics = SolveDiagnostics()
        current = self.initial_level()
        levels = [current]
        no_policy = np.full(grid.interior_indices.shape[0], -1)
        policies = [no_policy]
        if observer is not None:
            observer(current, no_policy)
        self._track_bound(current, diagnostics)

        for n in range(1, grid.n_steps + 1):
            result = self.step(current)
            current = result.level
            if result.howard is not None:
                diagnostics.howard_iterations.append(result.howard.iterations)
                diagnostics.linear_solves += result.howard.linear_solves
                diagnostics.policy_changes += result.howard.policy_changes
                diagnostics.max_residual = max(diagnostics.max_residual, result.howard.residual)
                diagnostics.howard_monotone = diagnostics.howard_monotone and result.howard.monotone
            self._track_bound(current, diagnostics)
            if observer is not None:
                observer(current, result.policy)
            if n % cfg.store_stride == 0 or n == grid.n_steps:
                levels.append(current)
                policies.append(result.policy)

        diagnostics.positivity = self.positivity
        diagnostics.growth_rate = self._growth
        self._log(
            "solve_completed",
            {
                "problem": self.problem.name,
                "scheme": self.scheme.kind.value,
                "theta": cfg.theta,
                "dx": grid.dx_min,
                "dt": grid.dt,
                "n_steps": grid.n_steps,
                **diagnostics.to_dict(),
            },
        )
        return Solution(grid=grid, levels=tuple(levels), policies=tuple(policies), diagnostics=diagnostics)

    def _policy_system(
        self,
        values: np.ndarray,
        new_ops: list[StencilOperator],
        old_terms: list[np.ndarray],
        u_int: np.ndarray,
        level: int,
    ) -> PolicySystem:
        theta = self.config.theta
        dt = self.grid.dt
        size = u_int.shape[0]
        identity = sparse.identity(size, format="csr") / dt
        boundary_now = values[self.grid.boundary_indices]
        matrices, rhs = [], []
        for pos, op in enumerate(new_ops):
            matrices.append((identity + theta * (sparse.diags(op.center) - op.interior_block)).tocsr())
            known = op.boundary_block @ boundary_now + op.boundary_sum(self._boundary_values(op, level)) + op.constant
            f = u_int / dt + theta * known
            if old_terms:
                f = f - (1.0 - theta) * old_terms[pos]
            rhs.append(f)
        return PolicySystem(matrices=matrices, rhs=rhs)

    def _boundary_values(self, op: StencilOperator, level: int) -> Optional[np.ndarray]:
        if not op.has_boundary_targets:
            return None
        out = self.boundary_evaluator(level)(op.boundary_points)
        self._psi_max = max(self._psi_max, float(np.max(np.abs(out))))
        return out

    def _track_coefficients(self, ops: list[StencilOperator]) -> None:
        for op in ops:
            self._cost_max = max(self._cost_max, float(np.max(np.abs(op.constant), initial=0.0)))
            self._growth = max(self._growth, float(np.max(op.discount, initial=0.0)))

    def _check_positivity(self, t: float, ops: list[StencilOperator]) -> None:
        key = None if self.problem.time_homogeneous else t
        if key in self._checked_times or not ops:
            return
        self._checked_times.add(key)
        report = check_positive_type(ops, self.grid.dt, self.config.theta)
        if self.positivity is None or report.slack < self.positivity.slack:
            self.positivity = report
        if report.passed:
            return
        self._log("positivity_violation", report.to_dict())
        reason = (report.violation or {}).get("reason", "")
        if reason == "negative explicit coefficient":
            raise CFLViolationError(f"dt={self.grid.dt:.6g} breaks the explicit positivity bound: {report.violation}")
        raise NonMonotoneSchemeError(f"Scheme is not of positive type: {report.violation}")

    def _track_bound(self, level: GridFunction, diagnostics: SolveDiagnostics) -> None:
        t = level.time
        bound = math.exp(self._growth * t) * (self._psi_max + t * self._cost_max)
        slack = bound - level.sup_norm()
        diagnostics.sup_bound_slack = min(diagnostics.sup_bound_slack, slack)
        if slack < -self.config.sup_bound_slack and diagnostics.sup_bound_ok:
            diagnostics.sup_bound_ok = False
            self._log("sup_bound_violated", {"level": level.time_level, "bound": bound, "sup": level.sup_norm()})

    def _log(self, event: str, payload: dict) -> None:
        if self.logger is not None:
            self.logger.log_event(event, "solver", payload)


def step(
    p: ControlProblem,
    scheme: StencilScheme,
    cfg: SolverConfig,
    prev: GridFunction,
) -> GridFunction:
    return HJBSolver(p, scheme, cfg).step(prev).level


def solve(
    p: ControlProblem,
    scheme: StencilScheme,
    grid: Optional[SpaceTimeGrid] = None,
    cfg: Optional[SolverConfig] = None,
    observer: Optional[Observer] = None,
    logger: Optional[RunLogger] = None,
) -> Solution:
    if grid is not None and grid != scheme.grid:
        raise ValueError("Scheme was assembled on a different grid")
    return HJBSolver(p, scheme, cfg or SolverConfig(), logger).solve(observer)


def scheme_residual(
    scheme: StencilScheme,
    theta: float,
    level: int,
    previous: np.ndarray,
    current: np.ndarray,
    boundary_previous: BoundaryEvaluator,
    boundary_current: BoundaryEvaluator,
    controls: Optional[Sequence[int]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """S(U^n) = max_a [(U^n - U^{n-1})/dt + theta L_n[U^n] + (1-theta) L_{n-1}[U^{n-1}]] on interior nodes.

    Returns the residual and the maximizing control index per node.
    """
    grid = scheme.grid
    dt = grid.dt
    t0, t1 = grid.time(level - 1), grid.time(level)
    chosen = list(range(len(scheme.controls))) if controls is None else list(controls)
    interior = grid.interior_indices
    base = (current[interior] - previous[interior]) / dt
    rows = []
    for k in chosen:
        total = base.copy()
        if theta > 0.0:
            op = scheme.operator(t1, k)
            total += theta * op.apply(current, _targets(op, boundary_current))
        if theta < 1.0:
            op = scheme.operator(t0, k)
            total += (1.0 - theta) * op.apply(previous, _targets(op, boundary_previous))
        rows.append(total)
    stacked = np.stack(rows)
    best = np.argmax(stacked, axis=0)
    return stacked[best, np.arange(stacked.shape[1])], np.asarray(chosen)[best]


def _targets(op: StencilOperator, evaluator: BoundaryEvaluator) -> Optional[np.ndarray]:
    return evaluator(op.boundary_points) if op.has_boundary_targets else None
