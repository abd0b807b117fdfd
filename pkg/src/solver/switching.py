from __future__ import annotations

from typing import Any, Optional, Sequence, Union

import numpy as np

from src.errors import ConfigError
from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem
from src.schemes import SchemeKind, SLConfig, StencilScheme, build_scheme
from src.solver.engine import HJBSolver, scheme_residual
from src.solver.models import SolveDiagnostics, Solution, SolverConfig, SwitchingState

FEASIBILITY_TOL = 1e-12


def solve_switching(
    p: ControlProblem,
    scheme_kind: Union[SchemeKind, str],
    grid: SpaceTimeGrid,
    cfg: SolverConfig,
    modes: Sequence[Sequence[Any]],
    k: float,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> SwitchingState:
    """Coupled system max{S_i(U_i), U_i - min_{j != i} U_j - k} = 0, one mode per control subset.

    Every mode takes its own theta step, then the switching obstacle is
    enforced by Gauss-Seidel sweeps U_i <- min(U_i, min_{j != i} U_j + k).
    """
    if not k > 0:
        raise ConfigError(f"Switching cost must be positive, got {k}")
    if not modes:
        raise ConfigError("Switching needs at least one mode")
    subsets = [_mode_indices(p, mode) for mode in modes]
    scheme = build_scheme(scheme_kind, p, grid, sl_config)
    solver = HJBSolver(p, scheme, cfg, logger)
    m = len(subsets)

    start = solver.initial_level()
    current = [start.values.copy() for _ in range(m)]
    stored: list[list[GridFunction]] = [[start] for _ in range(m)]
    policies: list[list[np.ndarray]] = [[np.full(grid.interior_indices.shape[0], -1)] for _ in range(m)]
    diagnostics = [SolveDiagnostics() for _ in range(m)]
    sweeps_max = 0
    feasibility = 0.0
    residual_max = 0.0

    for n in range(1, grid.n_steps + 1):
        results = []
        for i, subset in enumerate(subsets):
            prev = GridFunction(grid=grid, time_level=n - 1, values=current[i])
            result = solver.step(prev, controls=subset)
            results.append(result)
            if result.howard is not None:
                diagnostics[i].howard_iterations.append(result.howard.iterations)
                diagnostics[i].linear_solves += result.howard.linear_solves
                diagnostics[i].max_residual = max(diagnostics[i].max_residual, result.howard.residual)
        previous = current
        current, sweeps = project_switching([r.level.values for r in results], k)
        sweeps_max = max(sweeps_max, sweeps)
        feasibility = max(feasibility, switching_violation(current, k))
        residual_max = max(residual_max, _coupled_residual(solver, scheme, cfg, subsets, n, previous, current, k))

        if n % cfg.store_stride == 0 or n == grid.n_steps:
            for i in range(m):
                stored[i].append(GridFunction(grid=grid, time_level=n, values=current[i]))
                policies[i].append(results[i].policy)

    if feasibility > FEASIBILITY_TOL and logger is not None:
        logger.log_event("switching_infeasible", "solver", {"violation": feasibility, "k": k})
    solutions = tuple(
        Solution(grid=grid, levels=tuple(stored[i]), policies=tuple(policies[i]), diagnostics=diagnostics[i])
        for i in range(m)
    )
    state = SwitchingState(
        M=m,
        k=float(k),
        modes=tuple(tuple(p.controls[j] for j in subset) for subset in subsets),
        solutions=solutions,
        feasibility_max=feasibility,
        projection_sweeps_max=sweeps_max,
        residual_max=residual_max,
    )
    if logger is not None:
        logger.log_event(
            "switching_completed",
            "solver",
            {"M": m, "k": k, "feasibility_max": feasibility, "sweeps_max": sweeps_max, "residual_max": residual_max},
        )
    return state


def project_switching(values: Sequence[np.ndarray], k: float) -> tuple[list[np.ndarray], int]:
    """Enforce U_i <= min_{j != i} U_j + k; returns the projected levels and the sweep count."""
    out = [np.array(v, dtype=float, copy=True) for v in values]
    m = len(out)
    if m == 1:
        return out, 0
    sweeps = 0
    for _ in range(m + 1):
        sweeps += 1
        changed = False
        for i in range(m):
            others = np.min(np.stack([out[j] for j in range(m) if j != i]), axis=0) + k
            lowered = np.minimum(out[i], others)
            if np.any(lowered < out[i]):
                changed = True
                out[i] = lowered
        if not changed:
            break
    return out, sweeps


def switching_violation(values: Sequence[np.ndarray], k: float) -> float:
    """max_i max(U_i - min_{j != i} U_j - k), clipped at zero."""
    m = len(values)
    if m == 1:
        return 0.0
    worst = 0.0
    for i in range(m):
        others = np.min(np.stack([values[j] for j in range(m) if j != i]), axis=0)
        worst = max(worst, float(np.max(values[i] - others - k)))
    return worst


def _mode_indices(p: ControlProblem, mode: Sequence[Any]) -> list[int]:
    if not mode:
        raise ConfigError("Every switching mode needs at least one control")
    missing = [alpha for alpha in mode if alpha not in p.controls]
    if missing:
        raise ConfigError(f"Mode controls {missing} are not part of problem '{p.name}'")
    return [p.controls.index(alpha) for alpha in mode]


def _coupled_residual(
    solver: HJBSolver,
    scheme: StencilScheme,
    cfg: SolverConfig,
    subsets: list[list[int]],
    n: int,
    previous: list[np.ndarray],
    current: list[np.ndarray],
    k: float,
) -> float:
    interior = solver.grid.interior_indices
    worst = 0.0
    for i, subset in enumerate(subsets):
        s, _ = scheme_residual(
            scheme,
            cfg.theta,
            n,
            previous[i],
            current[i],
            solver.boundary_evaluator(n - 1),
            solver.boundary_evaluator(n),
            controls=subset,
        )
        if len(subsets) > 1:
            others = np.min(np.stack([current[j] for j in range(len(subsets)) if j != i]), axis=0)
            obstacle = (current[i] - others - k)[interior]
            s = np.maximum(s, obstacle)
        worst = max(worst, float(np.max(np.abs(s), initial=0.0)))
    return worst
