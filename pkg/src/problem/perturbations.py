from __future__ import annotations

from dataclasses import replace
from enum import Enum
from typing import Union

import numpy as np

from src.errors import ConfigError
from src.problem.models import ControlProblem


class Perturbation(str, Enum):
    SIGMA = "sigma"
    DRIFT = "drift"
    DISCOUNT = "discount"
    COST = "cost"


def perturb_problem(p: ControlProblem, kind: Union[Perturbation, str], delta: float) -> ControlProblem:
    """Copy of p with one coefficient shifted by delta in every entry.

    Boundary and initial data are untouched, so the two problems differ only
    through the equation.
    """
    kind = Perturbation(kind)
    if not np.isfinite(delta):
        raise ConfigError(f"Perturbation size must be finite, got {delta}")
    if delta == 0.0:
        return p
    name = f"{p.name}+{kind.value}({delta:g})"

    if kind is Perturbation.SIGMA:

        def sigma(alpha, t, x):
            return p.sigma_at(alpha, t, x) + delta

        return replace(p, name=name, sigma=sigma, exact_solution=None, exact_jet=None, barrier=None)
    if kind is Perturbation.DRIFT:

        def drift(alpha, t, x):
            return p.drift_at(alpha, t, x) + delta

        return replace(p, name=name, drift=drift, exact_solution=None, exact_jet=None, barrier=None)
    if kind is Perturbation.DISCOUNT:

        def discount(alpha, t, x):
            return p.discount_at(alpha, t, x) + delta

        return replace(p, name=name, discount=discount, exact_solution=None, exact_jet=None, barrier=None)

    def running_cost(alpha, t, x):
        return p.cost_at(alpha, t, x) + delta

    return replace(p, name=name, running_cost=running_cost, exact_solution=None, exact_jet=None, barrier=None)
