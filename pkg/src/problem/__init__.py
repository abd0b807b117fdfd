from src.problem.audits import audit_A1, audit_A2, audit_A3, bisect_barrier_parameter
from src.problem.builtins import BUILTIN_PROBLEMS, builtin_problem
from src.problem.models import AuditReport, BarrierValue, ControlProblem, FunctionJet
from src.problem.perturbations import Perturbation, perturb_problem
from src.problem.smoothing import SmoothingReport, smooth_initial_data

__all__ = [
    "AuditReport",
    "BUILTIN_PROBLEMS",
    "BarrierValue",
    "ControlProblem",
    "FunctionJet",
    "Perturbation",
    "SmoothingReport",
    "audit_A1",
    "audit_A2",
    "audit_A3",
    "bisect_barrier_parameter",
    "builtin_problem",
    "perturb_problem",
    "smooth_initial_data",
]
