from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import nnls

from src.errors import ConfigError
from src.harness.models import ConsistencyReport
from src.harness.rungs import TimeStepRule, rung_grid
from src.logging.run_logger import RunLogger
from src.problem.models import ControlProblem, FunctionJet
from src.problem.mollifier import mollified_kink, mollified_time_kink
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.solver.engine import scheme_residual

KINK_CENTER = 0.5
FAMILIES = ("kink", "smooth")


class _TestFunction:
    """phi(t, x) with value, jet and boundary evaluators for one eps."""

    def __init__(self, family: str, eps: float, time_center: float, dim: int) -> None:
        self.family = family
        self.eps = eps
        self.time_center = time_center
        self.dim = dim

    def values(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.family == "smooth":
            return np.exp(-t) * np.prod(np.sin(np.pi * x), axis=1)
        g, _, _ = mollified_kink(x[:, 0], KINK_CENTER, self.eps)
        h, _ = mollified_time_kink(np.array([t]), self.time_center, self.eps)
        return g + h[0]

    def jet(self, t: float, x: np.ndarray) -> FunctionJet:
        n = x.shape[0]
        gradient = np.zeros((n, self.dim))
        hessian = np.zeros((n, self.dim, self.dim))
        if self.family == "smooth":
            s, c = np.sin(np.pi * x), np.cos(np.pi * x)
            value = np.exp(-t) * np.prod(s, axis=1)
            for i in range(self.dim):
                others = np.prod(np.delete(s, i, axis=1), axis=1)
                gradient[:, i] = np.exp(-t) * np.pi * c[:, i] * others
                hessian[:, i, i] = -(np.pi**2) * value
                for j in range(i + 1, self.dim):
                    rest = np.prod(np.delete(s, [i, j], axis=1), axis=1)
                    cross = np.exp(-t) * np.pi**2 * c[:, i] * c[:, j] * rest
                    hessian[:, i, j] = hessian[:, j, i] = cross
            return FunctionJet(value=value, gradient=gradient, hessian=hessian, time_derivative=-value)
        g, first, second = mollified_kink(x[:, 0], KINK_CENTER, self.eps)
        h, dh = mollified_time_kink(np.array([t]), self.time_center, self.eps)
        gradient[:, 0] = first
        hessian[:, 0, 0] = second
        return FunctionJet(value=g + h[0], gradient=gradient, hessian=hessian, time_derivative=np.full(n, dh[0]))

    def boundary(self, t: float) -> Callable[[np.ndarray], np.ndarray]:
        return lambda pts: self.values(t, pts)


def consistency_probe(
    problem: ControlProblem,
    scheme: Union[SchemeKind, str],
    theta: float,
    dx: float,
    eps_ladder: Sequence[float],
    family: str = "kink",
    sl_config: Optional[SLConfig] = None,
    logger: Optional[RunLogger] = None,
) -> ConsistencyReport:
    """Truncation error of the scheme on eps-scaled test functions, fitted to the error model.

    The equation is evaluated at t_{n-1} + theta*dt, where the theta-weighted
    scheme is centered, so the |1-2theta| dt term is the only first-order one.
    """
    kind = SchemeKind(scheme)
    if family not in FAMILIES:
        raise ConfigError(f"Unknown test family '{family}'. Choose from: {', '.join(FAMILIES)}")
    eps_values = [float(e) for e in eps_ladder]
    if not eps_values:
        raise ConfigError("Consistency probe needs at least one eps")
    if min(eps_values) < 2.0 * dx:
        raise ConfigError(f"eps={min(eps_values)} is too small for dx={dx}; need eps >= 2*dx")

    grid = rung_grid(problem, kind, theta, dx, TimeStepRule(cfl_safety=1.0), sl_config)
    built = build_scheme(kind, problem, grid, sl_config)
    n = grid.n_steps
    t_prev, t_now = grid.time(n - 1), grid.time(n)
    t_mid = t_prev + theta * grid.dt
    interior = grid.interior_indices
    pts = grid.points[interior]
    depth = grid.distance_to_boundary(pts)

    truncation, features = [], []
    for eps in eps_values:
        phi = _TestFunction(family, eps, t_now - eps**2 / 2.0, grid.dim)
        s, _ = scheme_residual(
            built,
            theta,
            n,
            phi.values(t_prev, grid.points),
            phi.values(t_now, grid.points),
            phi.boundary(t_prev),
            phi.boundary(t_now),
        )
        pde = problem.hamiltonian_residual(t_mid, pts, phi.jet(t_mid, pts))
        inside = depth > (max(eps_values) if family == "smooth" else eps)
        if not inside.any():
            raise ConfigError(f"No interior node lies farther than eps={eps} from the boundary")
        truncation.append(float(np.max(np.abs(pde - s)[inside])))
        features.append(
            [
                abs(1.0 - 2.0 * theta) * grid.dt * eps**-3,
                grid.dt**2 * eps**-5,
                dx * eps**-3,
            ]
        )

    coefficients, residual = _fit_model(np.array(features), np.array(truncation))
    largest = max(coefficients)
    report = ConsistencyReport(
        problem=problem.name,
        scheme=kind.value,
        theta=theta,
        family=family,
        dx=dx,
        dt=grid.dt,
        eps=eps_values,
        truncation=truncation,
        features=features,
        coefficients=coefficients,
        relative_residual=residual,
        theta_term_share=coefficients[0] / largest if largest > 0 else 0.0,
    )
    if logger is not None:
        logger.log_event("study_completed", "consistency", report.to_dict())
    return report


def _fit_model(features: np.ndarray, measured: np.ndarray) -> tuple[list[float], float]:
    """Nonnegative least squares on column-normalized features; relative residual ||Ac - y|| / ||y||."""
    scale = np.linalg.norm(features, axis=0)
    usable = scale > 0.0
    coefficients = np.zeros(features.shape[1])
    if usable.any():
        solved, _ = nnls(features[:, usable] / scale[usable], measured)
        coefficients[usable] = solved / scale[usable]
    norm = float(np.linalg.norm(measured))
    residual = float(np.linalg.norm(features @ coefficients - measured)) / norm if norm > 0 else 0.0
    return [float(c) for c in coefficients], residual
