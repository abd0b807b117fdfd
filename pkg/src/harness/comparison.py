from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import numpy as np

from src.config.settings import HarnessConfig
from src.errors import ConfigError
from src.grid.space_time import SpaceTimeGrid
from src.harness.models import ComparisonReport, ComparisonRung
from src.harness.rungs import gather_rungs, solver_config
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem
from src.problem.perturbations import Perturbation, perturb_problem
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.solver.engine import HJBSolver

ORDER_TOL = 1e-10
BOUND_TOL = 1e-12


async def comparison_probe(
    problem: ControlProblem,
    scheme: Union[SchemeKind, str],
    theta: float,
    grid: SpaceTimeGrid,
    deltas: Sequence[float],
    config: Optional[HarnessConfig] = None,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> ComparisonReport:
    """Sub/super pairs from running costs l - delta and l + delta.

    Both share the parabolic boundary data, so the discrete comparison bound
    reduces to u+ - u- <= e^{mu t} 2t |2 delta|. Each rung fits the smallest
    mu >= 0 that makes it hold; a single mu must serve the whole ladder.
    """
    kind = SchemeKind(scheme)
    config = config or HarnessConfig()
    ladder = [float(d) for d in deltas]
    if not ladder or any(d <= 0 for d in ladder):
        raise ConfigError(f"Comparison deltas must be positive, got {ladder}")
    cfg = solver_config(config, theta)
    times = np.array([grid.time(n) for n in range(grid.n_levels)])

    def solve_pair(delta: float) -> tuple[float, np.ndarray]:
        arrays = []
        for sign in (1.0, -1.0):
            shifted = perturb_problem(problem, Perturbation.COST, sign * delta)
            arrays.append(HJBSolver(shifted, build_scheme(kind, shifted, grid, sl_config), cfg).solve().as_array())
        return delta, arrays[0] - arrays[1]

    pairs = await gather_rungs(solve_pair, ladder)
    fitted = [_fitted_rate(diff, times, delta) for delta, diff in pairs]
    mu = max(fitted)

    rungs = []
    for (delta, diff), mu_delta in zip(pairs, fitted):
        bound = np.exp(mu * times) * 4.0 * times * delta
        excess = diff.max(axis=1) - bound
        rung = ComparisonRung(
            delta=delta,
            mu=mu_delta,
            max_excess=float(excess.max()),
            ordered=bool(diff.min() >= -ORDER_TOL),
            violations=int(np.count_nonzero(excess > BOUND_TOL)),
        )
        rungs.append(rung)
        if logger is not None:
            logger.log_event("rung_completed", "comparison", rung.__dict__)

    report = ComparisonReport(
        problem=problem.name,
        scheme=kind.value,
        mu=mu,
        mu_spread=mu - min(fitted),
        rungs=rungs,
    )
    if logger is not None:
        logger.log_event("study_completed", "comparison", report.to_dict())
    return report


def _fitted_rate(diff: np.ndarray, times: np.ndarray, delta: float) -> float:
    """Smallest mu >= 0 with max_x diff(t, .) <= e^{mu t} 4 t delta at every level t > 0."""
    mu = 0.0
    for t, row in zip(times[1:], diff[1:]):
        ratio = float(row.max()) / (4.0 * t * delta)
        if ratio > 1.0:
            mu = max(mu, math.log(ratio) / t)
    return mu
