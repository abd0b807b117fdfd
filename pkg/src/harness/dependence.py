from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from src.config.settings import HarnessConfig
from src.errors import ConfigError
from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.harness.fitting import fit_order
from src.harness.models import DependenceReport, DependenceSeries
from src.harness.rungs import gather_rungs, solver_config
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem
from src.problem.perturbations import Perturbation, perturb_problem
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.solver.engine import HJBSolver

# sqrt(delta) for the diffusion, delta for the lower-order coefficients.
THRESHOLDS: dict[Perturbation, float] = {
    Perturbation.SIGMA: 0.45,
    Perturbation.DRIFT: 0.95,
    Perturbation.DISCOUNT: 0.95,
    Perturbation.COST: 0.95,
}


class _SupDifference:
    def __init__(self, reference: np.ndarray) -> None:
        self.reference = reference
        self.value = 0.0

    def __call__(self, level: GridFunction, policy: np.ndarray) -> None:
        diff = np.abs(level.values - self.reference[level.time_level])
        self.value = max(self.value, float(diff.max()))


async def continuous_dependence_probe(
    problem: ControlProblem,
    scheme: Union[SchemeKind, str],
    theta: float,
    grid: SpaceTimeGrid,
    deltas: Sequence[float],
    kinds: Sequence[Union[Perturbation, str]] = tuple(Perturbation),
    config: Optional[HarnessConfig] = None,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> DependenceReport:
    """sup |u_h - u_h(perturbed)| over the whole grid, and its scaling exponent in delta."""
    kind = SchemeKind(scheme)
    config = config or HarnessConfig()
    ladder = [float(d) for d in deltas]
    if not ladder or any(d <= 0 for d in ladder):
        raise ConfigError(f"Perturbation sizes must be positive, got {ladder}")
    cfg = solver_config(config, theta)
    base = HJBSolver(problem, build_scheme(kind, problem, grid, sl_config), cfg).solve().as_array()

    def run_case(case: tuple[Perturbation, float]) -> float:
        which, delta = case
        perturbed = perturb_problem(problem, which, delta)
        tracker = _SupDifference(base)
        stride_cfg = solver_config(config, theta, store_stride=grid.n_steps)
        HJBSolver(perturbed, build_scheme(kind, perturbed, grid, sl_config), stride_cfg).solve(observer=tracker)
        if logger is not None:
            logger.log_event(
                "rung_completed", "dependence", {"kind": which.value, "delta": delta, "difference": tracker.value}
            )
        return tracker.value

    chosen = [Perturbation(k) for k in kinds]
    cases = [(which, delta) for which in chosen for delta in ladder]
    differences = await gather_rungs(run_case, cases)
    series = []
    for pos, which in enumerate(chosen):
        diffs = differences[pos * len(ladder) : (pos + 1) * len(ladder)]
        exponent = fit_order(ladder, diffs, tail=len(ladder)) if len(ladder) > 1 else float("nan")
        series.append(
            DependenceSeries(
                kind=which.value,
                deltas=ladder,
                differences=diffs,
                exponent=exponent,
                threshold=THRESHOLDS[which],
            )
        )
    report = DependenceReport(problem=problem.name, scheme=kind.value, series=series)
    if logger is not None:
        logger.log_event("study_completed", "dependence", report.to_dict())
    return report
