"""Randomized and ladder-based property checks on the scheme axioms."""

from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import numpy as np
from scipy import sparse

from src.config.settings import HarnessConfig
from src.errors import ConfigError
from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.harness.fitting import fit_order
from src.harness.models import (
    CflReport,
    CflRung,
    HowardCheckReport,
    HowardInstance,
    MonotonicityCase,
    MonotonicityReport,
    SmoothingStudyReport,
)
from src.harness.rungs import TimeStepRule, gather_rungs, grid_with_step, rung_grid, solver_config
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem
from src.problem.smoothing import smooth_initial_data
from src.schemes import SchemeKind, SLConfig, build_scheme, cfl_bound, check_positive_type
from src.schemes.positivity import sweep_times
from src.solver.engine import HJBSolver
from src.solver.howard import howard_solve, value_iteration
from src.solver.models import PolicySystem, SolverConfig

MONOTONICITY_DX = 1.0 / 32.0
MONOTONICITY_SAFETY = 0.9
CFL_FRACTIONS = (0.25, 0.5, 1.0)
HOWARD_INITIAL = (-10.0, 10.0)
HOWARD_DENSITY = 0.3


def monotonicity_sweep(
    problem: ControlProblem,
    config: Optional[HarnessConfig] = None,
    schemes: Sequence[Union[SchemeKind, str]] = (SchemeKind.KD, SchemeKind.SL),
    thetas: Sequence[float] = (0.0, 0.5, 1.0),
    dx: float = MONOTONICITY_DX,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> MonotonicityReport:
    """Random ordered pairs f <= g at level 0; step(f) <= step(g) must hold with no tolerance."""
    config = config or HarnessConfig()
    if config.property_pairs < 1:
        raise ConfigError(f"property_pairs must be >= 1, got {config.property_pairs}")
    rng = np.random.default_rng(config.seed)
    rule = TimeStepRule(cfl_safety=MONOTONICITY_SAFETY)
    cases = []
    for scheme in schemes:
        kind = SchemeKind(scheme)
        for theta in thetas:
            grid = rung_grid(problem, kind, theta, dx, rule, sl_config)
            solver = HJBSolver(problem, build_scheme(kind, problem, grid, sl_config), solver_config(config, theta))
            interior = grid.interior_indices
            violations = 0
            min_gap = math.inf
            for _ in range(config.property_pairs):
                f = rng.uniform(-1.0, 1.0, grid.n_nodes)
                g = f.copy()
                g[interior] += rng.uniform(0.01, 1.0, interior.shape[0])
                low = solver.step(GridFunction(grid=grid, time_level=0, values=f)).level.values
                high = solver.step(GridFunction(grid=grid, time_level=0, values=g)).level.values
                violations += int(np.count_nonzero(low > high))
                min_gap = min(min_gap, float(np.min(high - low)))
            case = MonotonicityCase(
                scheme=kind.value,
                theta=float(theta),
                dt=grid.dt,
                pairs=config.property_pairs,
                violations=violations,
                min_gap=min_gap,
            )
            cases.append(case)
            if logger is not None:
                logger.log_event("rung_completed", "monotonicity", case.__dict__)
    report = MonotonicityReport(problem=problem.name, seed=config.seed, cases=cases)
    if logger is not None:
        logger.log_event("study_completed", "monotonicity", report.to_dict())
    return report


def random_policy_system(rng: np.random.Generator, nodes: int, controls: int) -> PolicySystem:
    """A_a = D_a - W_a with W_a >= 0 and D_a = rowsum(W_a) + U(0.1, 1): strictly dominant M-matrices."""
    matrices, rhs = [], []
    for _ in range(controls):
        weights = rng.uniform(0.0, 1.0, (nodes, nodes)) * (rng.random((nodes, nodes)) < HOWARD_DENSITY)
        np.fill_diagonal(weights, 0.0)
        diagonal = weights.sum(axis=1) + rng.uniform(0.1, 1.0, nodes)
        matrices.append(sparse.csr_matrix(np.diag(diagonal) - weights))
        rhs.append(rng.uniform(-1.0, 1.0, nodes))
    return PolicySystem(matrices=matrices, rhs=rhs)


def howard_check(
    config: Optional[HarnessConfig] = None,
    instances: int = 10,
    nodes: int = 20,
    controls: int = 3,
    logger: Optional[RunLogger] = None,
) -> HowardCheckReport:
    """Howard against value iteration on random positive-type systems, from two extreme starts."""
    config = config or HarnessConfig()
    rng = np.random.default_rng(config.seed)
    cfg = SolverConfig(theta=1.0, policy_tol=config.policy_tol, policy_max_iters=config.policy_max_iters)
    results = []
    for index in range(instances):
        system = random_policy_system(rng, nodes, controls)
        runs = [howard_solve(system, cfg, initial=np.full(nodes, start)) for start in HOWARD_INITIAL]
        reference, sweeps = value_iteration(system)
        instance = HowardInstance(
            index=index,
            iterations=max(run.iterations for run in runs),
            value_iteration_sweeps=sweeps,
            error_vs_value_iteration=max(float(np.max(np.abs(run.values - reference))) for run in runs),
            initialization_gap=float(np.max(np.abs(runs[0].values - runs[1].values))),
        )
        results.append(instance)
        if logger is not None:
            logger.log_event("rung_completed", "howard-check", instance.__dict__)
    report = HowardCheckReport(seed=config.seed, nodes=nodes, controls=controls, instances=results)
    if logger is not None:
        logger.log_event("study_completed", "howard-check", report.to_dict())
    return report


async def cfl_study(
    problem: ControlProblem,
    ladder: Sequence[float],
    theta: float = 0.0,
    fractions: Sequence[float] = CFL_FRACTIONS,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> CflReport:
    """Largest explicit step of the truncated SL scheme per dx, and positivity below it."""
    dxs = [float(dx) for dx in ladder]
    if len(dxs) < 2:
        raise ConfigError("CFL study needs at least two grid spacings")
    base = sl_config or SLConfig()
    cfg = SLConfig(theta=theta, stencil_step=base.stencil_step, cfl_constant=base.cfl_constant)

    def run_rung(dx: float) -> CflRung:
        grid = grid_with_step(problem, dx, dx)
        bound = cfl_bound(problem, grid, cfg)
        scheme = build_scheme(SchemeKind.SL, problem, grid, cfg)
        ops = [op for t in sweep_times(scheme) for op in scheme.operators(t)]
        reference = bound if math.isfinite(bound) else dx
        positive = all(check_positive_type(ops, frac * reference, theta).passed for frac in fractions)
        rung = CflRung(dx=dx, bound=bound, checked_fractions=list(fractions), all_positive=positive)
        if logger is not None:
            logger.log_event("rung_completed", "cfl", rung.__dict__)
        return rung

    rungs = await gather_rungs(run_rung, dxs)
    bounds = [r.bound for r in rungs]
    exponent = fit_order(dxs, bounds, tail=len(dxs)) if all(map(math.isfinite, bounds)) else float("nan")
    report = CflReport(problem=problem.name, theta=theta, rungs=rungs, exponent=exponent)
    if logger is not None:
        logger.log_event("study_completed", "cfl", report.to_dict())
    return report


def smoothing_study(
    problem: ControlProblem,
    grid: SpaceTimeGrid,
    eps_ladder: Sequence[float],
    logger: Optional[RunLogger] = None,
) -> SmoothingStudyReport:
    """|psi0 - psi_eps| / eps across the ladder, plus the Lipschitz bound per eps."""
    if not eps_ladder:
        raise ConfigError("Smoothing study needs at least one eps")
    entries = [smooth_initial_data(problem, grid, float(eps), logger=logger)[1].to_dict() for eps in eps_ladder]
    report = SmoothingStudyReport(problem=problem.name, entries=entries)
    if logger is not None:
        logger.log_event("study_completed", "smoothing", report.to_dict())
    return report
