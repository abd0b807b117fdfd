from __future__ import annotations

from src.solver.engine import HJBSolver, scheme_residual, solve, step
from src.solver.howard import howard_solve, value_iteration
from src.solver.models import (
    HowardResult,
    PolicySystem,
    SolveDiagnostics,
    Solution,
    SolverConfig,
    StepResult,
    SwitchingState,
)
from src.solver.switching import project_switching, solve_switching, switching_violation

__all__ = [
    "HJBSolver",
    "HowardResult",
    "PolicySystem",
    "SolveDiagnostics",
    "Solution",
    "SolverConfig",
    "StepResult",
    "SwitchingState",
    "howard_solve",
    "project_switching",
    "scheme_residual",
    "solve",
    "solve_switching",
    "step",
    "switching_violation",
    "value_iteration",
]
