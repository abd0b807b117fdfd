from __future__ import annotations

import math
from typing import Optional

import numpy as np

from src.errors import CFLViolationError, ConfigError
from src.harness.models import BoundaryLayerReport
from src.logging.run_logger import RunLogger
from src.problem.builtins import boundary_layer

STABILITY_FACTOR = 16.0
HISTORY_ROWS = 200
PROBE_POINT = 0.5


def boundary_layer_demo(
    dx: float = 1.0 / 64.0,
    safety: float = 0.99,
    logger: Optional[RunLogger] = None,
) -> BoundaryLayerReport:
    """Explicit three-point scheme for u_t - x^2(1-x)^2 u_xx / 2 + u = 0, u = 1 on the parabolic boundary.

    The scheme is monotone and stable, yet the value next to x = 0 stays above
    a partial geometric sum converging to (1 + 3e^{-2t}) / 4 while the interior
    follows e^{-t}.
    """
    if not 0.0 < safety <= 1.0:
        raise ConfigError(f"safety must lie in (0, 1], got {safety}")
    if not 0.0 < dx < 0.5:
        raise ConfigError(f"dx must lie in (0, 0.5), got {dx}")
    cells = int(round(1.0 / dx))
    if abs(cells * dx - 1.0) > 1e-9:
        raise ConfigError(f"dx={dx} does not divide the unit interval")

    problem = boundary_layer()
    horizon = problem.horizon
    n_steps = math.ceil(horizon / (safety * STABILITY_FACTOR * dx**2) - 1e-9)
    dt = horizon / n_steps
    if dt > STABILITY_FACTOR * dx**2:
        raise CFLViolationError(f"dt={dt:.6g} exceeds the stability bound {STABILITY_FACTOR * dx**2:.6g}")

    x = np.linspace(0.0, 1.0, cells + 1)
    inner = x[1:-1].reshape(-1, 1)
    control = problem.controls[0]
    # a_j / dx^2 reduces to j^2 (1 - x_j)^2 / 2 for this diffusion.
    weight = problem.diffusion(control, 0.0, inner)[:, 0, 0] / dx**2
    rate = problem.discount_at(control, 0.0, inner)
    source = problem.cost_at(control, 0.0, inner)
    explicit = 1.0 - dt * (2.0 * weight - rate)
    slack = float(explicit.min())
    if slack < 0.0:
        raise CFLViolationError(f"dt={dt:.6g} gives a negative explicit coefficient {slack:.3g}")

    u = problem.initial_values(x.reshape(-1, 1))
    ends = x[[0, -1]].reshape(-1, 1)
    edge = (1.0 - dx) ** 2
    bound = 1.0
    bound_slack = u[1] - bound
    every = max(1, n_steps // HISTORY_ROWS)
    history = [(0.0, float(u[1]), bound)]
    for n in range(1, n_steps + 1):
        t = n * dt
        second = u[2:] - 2.0 * u[1:-1] + u[:-2]
        interior = u[1:-1] + dt * (weight * second + rate * u[1:-1] + source)
        u = np.empty_like(u)
        u[1:-1] = interior
        u[[0, -1]] = problem.boundary_values(t, ends)
        bound = 0.5 * dt * edge + (1.0 - 2.0 * dt) * bound
        bound_slack = min(bound_slack, u[1] - bound)
        if n % every == 0 or n == n_steps:
            history.append((t, float(u[1]), bound))

    interior_value = float(np.interp(PROBE_POINT, x, u))
    continuum = math.exp(-horizon)
    report = BoundaryLayerReport(
        dx=dx,
        dt=dt,
        safety=safety,
        n_steps=n_steps,
        u1_final=float(u[1]),
        lower_bound=bound,
        interior_value=interior_value,
        interior_err=abs(interior_value - continuum),
        gap=float(u[1]) - continuum,
        limit=(1.0 + 3.0 * math.exp(-2.0 * horizon)) / 4.0,
        bound_slack=float(bound_slack),
        monotonicity_slack=slack,
        history=history,
    )
    if logger is not None:
        logger.log_event("study_completed", "boundary-layer", report.to_dict())
    return report
