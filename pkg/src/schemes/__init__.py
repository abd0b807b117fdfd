from __future__ import annotations

from typing import Optional, Union

from src.grid.space_time import SpaceTimeGrid
from src.problem.models import ControlProblem
from src.schemes.base import StencilScheme
from src.schemes.kushner_dupuis import KushnerDupuisScheme, assemble_kd
from src.schemes.models import (
    BoundaryTarget,
    PositivityReport,
    SchemeKind,
    SLConfig,
    StencilOperator,
    StencilRow,
)
from src.schemes.positivity import check_positive_type, explicit_step_bound
from src.schemes.semi_lagrangian import (
    SemiLagrangianScheme,
    assemble_sl,
    cfl_bound,
    consistency_error_model,
    recommended_time_step,
)


def build_scheme(
    kind: Union[SchemeKind, str],
    problem: ControlProblem,
    grid: SpaceTimeGrid,
    sl_config: Optional[SLConfig] = None,
) -> StencilScheme:
    kind = SchemeKind(kind)
    if kind is SchemeKind.KD:
        return KushnerDupuisScheme(problem, grid)
    return SemiLagrangianScheme(problem, grid, sl_config)


__all__ = [
    "BoundaryTarget",
    "KushnerDupuisScheme",
    "PositivityReport",
    "SLConfig",
    "SchemeKind",
    "SemiLagrangianScheme",
    "StencilOperator",
    "StencilRow",
    "StencilScheme",
    "assemble_kd",
    "assemble_sl",
    "build_scheme",
    "cfl_bound",
    "check_positive_type",
    "consistency_error_model",
    "explicit_step_bound",
    "recommended_time_step",
]
