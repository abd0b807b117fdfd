from __future__ import annotations

import math
from typing import TYPE_CHECKING, Iterable, Optional, Sequence, Union

import numpy as np

from src.schemes.models import PositivityReport, StencilOperator, StencilRow

if TYPE_CHECKING:
    from src.schemes.base import StencilScheme

MAX_SWEEP_TIMES = 17


def check_positive_type(
    rows: Iterable[Union[StencilOperator, StencilRow]],
    dt: float,
    theta: float,
) -> PositivityReport:
    """Off-center weights >= 0, explicit coefficient 1-(1-theta)dt*center >= 0,
    implicit margin 1-theta*dt*c >= 0. No tolerance is applied."""
    min_off = math.inf
    min_explicit = math.inf
    min_implicit = math.inf
    violation: Optional[dict] = None
    checked = 0

    for block in rows:
        node, control, time, center, discount, off_min, off_at = _arrays(block)
        checked += center.shape[0]
        explicit = 1.0 - (1.0 - theta) * dt * center
        implicit = 1.0 - theta * dt * discount
        min_off = min(min_off, off_min)
        if explicit.size:
            min_explicit = min(min_explicit, float(explicit.min()))
            min_implicit = min(min_implicit, float(implicit.min()))
        if violation is not None:
            continue
        if off_min < 0.0:
            violation = _violation(node[off_at], control, time, "negative off-center weight", off_min)
        elif explicit.size and explicit.min() < 0.0:
            k = int(np.argmin(explicit))
            violation = _violation(node[k], control, time, "negative explicit coefficient", float(explicit[k]))
        elif implicit.size and implicit.min() < 0.0:
            k = int(np.argmin(implicit))
            violation = _violation(node[k], control, time, "implicit diagonal not dominant", float(implicit[k]))

    return PositivityReport(
        passed=violation is None,
        dt=dt,
        theta=theta,
        min_off_weight=min_off,
        min_explicit_coefficient=min_explicit,
        min_implicit_margin=min_implicit,
        rows_checked=checked,
        violation=violation,
    )


def explicit_step_bound(scheme: StencilScheme, theta: float, times: Optional[Sequence[float]] = None) -> float:
    """Largest dt keeping 1 - (1-theta)*dt*center >= 0 on every assembled row."""
    if theta >= 1.0:
        return math.inf
    if times is None:
        times = sweep_times(scheme)
    largest = max(float(np.max(op.center, initial=0.0)) for t in times for op in scheme.operators(float(t)))
    if largest <= 0.0:
        return math.inf
    factor = (1.0 - theta) * largest
    dt = 1.0 / factor
    while 1.0 - factor * dt < 0.0:
        dt = float(np.nextafter(dt, 0.0))
    return dt


def sweep_times(scheme: StencilScheme) -> list[float]:
    if scheme.problem.time_homogeneous:
        return [0.0]
    count = min(scheme.grid.n_steps, MAX_SWEEP_TIMES - 1) + 1
    return [float(t) for t in np.linspace(0.0, scheme.grid.horizon, count)]


def _arrays(block: Union[StencilOperator, StencilRow]) -> tuple:
    if isinstance(block, StencilOperator):
        off_min, off_at = block.min_off_weight
        return block.rows, block.control, block.time, block.center, block.discount, off_min, max(off_at, 0)
    weights = [w for _, w in block.node_entries] + [w for _, w in block.boundary_entries]
    return (
        np.array([block.center]),
        block.control,
        block.time,
        np.array([block.center_weight]),
        np.array([block.discount]),
        min(weights) if weights else math.inf,
        0,
    )


def _violation(node: int, control: object, time: float, reason: str, value: float) -> dict:
    return {"node": int(node), "control": control, "time": float(time), "reason": reason, "value": value}
