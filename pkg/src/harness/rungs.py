from __future__ import annotations

import asyncio
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, TypeVar

from src.config.settings import HarnessConfig
from src.grid.space_time import SpaceTimeGrid, build_grid
from src.problem.models import ControlProblem
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.schemes.positivity import explicit_step_bound
from src.solver.models import SolverConfig

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class TimeStepRule:
    """dt = factor * dx^power, optionally clipped to cfl_safety times the explicit bound."""

    factor: float = 1.0
    power: float = 1.0
    cfl_safety: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.factor > 0 and self.power > 0):
            raise ValueError(f"Time step rule needs positive factor and power, got {self.factor}, {self.power}")
        if self.cfl_safety is not None and not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")

    def nominal(self, dx: float) -> float:
        return self.factor * dx**self.power


async def gather_rungs(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Run fn over items in worker threads; results come back in input order."""
    return list(await asyncio.gather(*(asyncio.to_thread(fn, item) for item in items)))


def grid_with_step(problem: ControlProblem, dx: float, dt_max: float) -> SpaceTimeGrid:
    """Uniform grid of spacing dx whose time step divides the horizon and never exceeds dt_max."""
    nodes = [int(round((hi - lo) / dx)) + 1 for lo, hi in zip(problem.lower, problem.upper)]
    n_steps = max(1, math.ceil(problem.horizon / dt_max - 1e-9))
    dt = problem.horizon / n_steps
    while dt > dt_max:
        n_steps += 1
        dt = problem.horizon / n_steps
    return build_grid(problem.lower, problem.upper, nodes, dt, n_steps)


def rung_grid(
    problem: ControlProblem,
    kind: SchemeKind,
    theta: float,
    dx: float,
    rule: TimeStepRule,
    sl_config: Optional[SLConfig] = None,
) -> SpaceTimeGrid:
    grid = grid_with_step(problem, dx, rule.nominal(dx))
    if rule.cfl_safety is None or theta >= 1.0:
        return grid
    bound = explicit_step_bound(build_scheme(kind, problem, grid, sl_config), theta)
    if math.isinf(bound) or grid.dt <= rule.cfl_safety * bound:
        return grid
    return grid_with_step(problem, dx, rule.cfl_safety * bound)


def solver_config(config: HarnessConfig, theta: float, store_stride: int = 1) -> SolverConfig:
    return SolverConfig(
        theta=theta,
        policy_tol=config.policy_tol,
        policy_max_iters=config.policy_max_iters,
        linear_tol=config.linear_tol,
        store_stride=store_stride,
    )
