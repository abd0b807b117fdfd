from __future__ import annotations

from src.harness.barrier import barrier_audit
from src.harness.boundary_layer import boundary_layer_demo
from src.harness.comparison import comparison_probe
from src.harness.consistency import consistency_probe
from src.harness.convergence import convergence_study
from src.harness.dependence import continuous_dependence_probe
from src.harness.fitting import fit_order, optimal_refinement, theoretical_exponents
from src.harness.properties import cfl_study, howard_check, monotonicity_sweep, smoothing_study
from src.harness.rungs import TimeStepRule
from src.harness.switching_study import switching_study

__all__ = [
    "TimeStepRule",
    "barrier_audit",
    "boundary_layer_demo",
    "cfl_study",
    "comparison_probe",
    "consistency_probe",
    "continuous_dependence_probe",
    "convergence_study",
    "fit_order",
    "howard_check",
    "monotonicity_sweep",
    "optimal_refinement",
    "smoothing_study",
    "switching_study",
    "theoretical_exponents",
]
