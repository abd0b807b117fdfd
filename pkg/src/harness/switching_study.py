from __future__ import annotations

from typing import Any, Optional, Sequence, Union

import numpy as np

from src.config.settings import HarnessConfig
from src.errors import ConfigError
from src.grid.space_time import SpaceTimeGrid
from src.harness.fitting import fit_order
from src.harness.models import SwitchingReport, SwitchingRung
from src.harness.rungs import gather_rungs, solver_config
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.solver.engine import HJBSolver
from src.solver.switching import solve_switching

LOWER_TOL = 1e-9
MONOTONE_TOL = 1e-9


async def switching_study(
    problem: ControlProblem,
    scheme: Union[SchemeKind, str],
    theta: float,
    grid: SpaceTimeGrid,
    modes: Sequence[Sequence[Any]],
    k_ladder: Sequence[float],
    config: Optional[HarnessConfig] = None,
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> SwitchingReport:
    """Gap between the switching system and the full-control solve as k shrinks."""
    kind = SchemeKind(scheme)
    config = config or HarnessConfig()
    ks = [float(k) for k in k_ladder]
    if not ks or any(k <= 0 for k in ks):
        raise ConfigError(f"Switching costs must be positive, got {ks}")
    if any(b >= a for a, b in zip(ks, ks[1:])):
        raise ConfigError(f"k ladder must be strictly decreasing, got {ks}")
    cfg = solver_config(config, theta)
    full = HJBSolver(problem, build_scheme(kind, problem, grid, sl_config), cfg).solve().as_array()

    def run_rung(k: float) -> SwitchingRung:
        state = solve_switching(problem, kind, grid, cfg, modes, k, sl_config=sl_config)
        excess = np.stack([s.as_array() for s in state.solutions]) - full[None]
        rung = SwitchingRung(
            k=k,
            gap=float(excess.max()),
            min_excess=float(excess.min()),
            feasibility=state.feasibility_max,
            sweeps=state.projection_sweeps_max,
        )
        if logger is not None:
            logger.log_event("rung_completed", "switching", rung.__dict__)
        return rung

    rungs = await gather_rungs(run_rung, ks)
    gaps = [r.gap for r in rungs]
    report = SwitchingReport(
        problem=problem.name,
        scheme=kind.value,
        modes=[list(m) for m in modes],
        rungs=rungs,
        order=fit_order(ks, gaps, tail=len(ks)) if len(ks) > 1 else float("nan"),
        lower_ok=all(r.min_excess >= -LOWER_TOL for r in rungs),
        monotone=all(b <= a + MONOTONE_TOL for a, b in zip(gaps, gaps[1:])),
    )
    if logger is not None:
        logger.log_event("study_completed", "switching", report.to_dict())
    return report
