from __future__ import annotations

import math
from typing import Any, Sequence, Union

import numpy as np

from src.schemes.models import SchemeKind

# (dt exponent, dx exponent) of the worst-case error bounds.
THEORETICAL_ORDERS: dict[tuple[str, str, str], tuple[float, float]] = {
    ("kd", "any", "lower"): (1 / 10, 1 / 5),
    ("kd", "any", "upper"): (1 / 4, 1 / 2),
    ("sl", "default", "lower"): (1 / 10, 1 / 10),
    ("sl", "default", "upper"): (1 / 4, 1 / 4),
    ("sl", "half", "lower"): (1 / 8, 1 / 10),
    ("sl", "half", "upper"): (1 / 3, 1 / 4),
}

# Explicit LISL steps are bounded by C * dx^{3/2}.
CFL_POWER = 1.5

_FIT_TAIL = 3
_FLOOR = 1e-300


def fit_order(steps: Sequence[float], errors: Sequence[float], tail: int = _FIT_TAIL) -> float:
    """Least-squares slope of log(error) against log(step) over the last `tail` points."""
    if len(steps) != len(errors):
        raise ValueError("steps and errors must have the same length")
    if len(steps) < 2:
        raise ValueError("An order fit needs at least two points")
    x = np.log(np.asarray(steps[-tail:], dtype=float))
    y = np.log(np.maximum(np.asarray(errors[-tail:], dtype=float), _FLOOR))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def local_orders(steps: Sequence[float], errors: Sequence[float]) -> list[Union[float, None]]:
    out: list[Union[float, None]] = [None]
    for k in range(1, len(steps)):
        e0, e1 = max(errors[k - 1], _FLOOR), max(errors[k], _FLOOR)
        out.append(math.log(e0 / e1) / math.log(steps[k - 1] / steps[k]))
    return out


def theoretical_exponents(kind: Union[SchemeKind, str], theta: float) -> dict[str, tuple[float, float]]:
    kind = SchemeKind(kind)
    if kind is SchemeKind.KD:
        variant = "any"
    else:
        variant = "half" if abs(theta - 0.5) < 1e-12 else "default"
    return {side: THEORETICAL_ORDERS[(kind.value, variant, side)] for side in ("lower", "upper")}


def effective_order(exponents: tuple[float, float], refinement_power: float) -> float:
    """Order in dx of max(dt^a, dx^b) when dt scales like dx^p."""
    dt_exp, dx_exp = exponents
    return min(dt_exp * refinement_power, dx_exp)


def optimal_refinement(theta: float) -> dict[str, Any]:
    """Balanced dt ~ dx^p for the LISL error model, and whether explicit steps can afford it."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if abs(theta - 0.5) < 1e-12:
        p_upper, p_lower = 3 / 4, 4 / 5
    else:
        p_upper = p_lower = 1.0
    compatible = theta >= 1.0 or min(p_upper, p_lower) >= CFL_POWER
    return {"theta": theta, "p_upper": p_upper, "p_lower": p_lower, "cfl_compatible": compatible}


def monotone_within(errors: Sequence[float], factor: float = 1.1) -> bool:
    return all(errors[k] <= factor * errors[k - 1] for k in range(1, len(errors)))
