from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from src.errors import ConfigError
from src.problem.models import ControlProblem, FunctionJet

PI = np.pi


def _zeros(n: int, d: int) -> np.ndarray:
    return np.zeros((n, d))


def _jet(value: np.ndarray, gradient: np.ndarray, hessian: np.ndarray, time_derivative: np.ndarray) -> FunctionJet:
    return FunctionJet(value=value, gradient=gradient, hessian=hessian, time_derivative=time_derivative)


def parabola_barrier(
    x: np.ndarray,
    scale: float = 1.0,
    rate: float = 0.0,
    t: float = 0.0,
    lower: Optional[Sequence[float]] = None,
    upper: Optional[Sequence[float]] = None,
) -> FunctionJet:
    """scale * e^{rate t} * prod_i (x_i - lo_i)(hi_i - x_i); the unit box by default."""
    n, d = x.shape
    lo = np.zeros(d) if lower is None else np.asarray(lower, dtype=float)
    hi = np.ones(d) if upper is None else np.asarray(upper, dtype=float)
    factor = scale * np.exp(rate * t)
    q = (x - lo) * (hi - x)
    dq = hi + lo - 2.0 * x
    value = factor * np.prod(q, axis=1)
    gradient = np.zeros((n, d))
    hessian = np.zeros((n, d, d))
    for i in range(d):
        rest = factor * np.prod(np.delete(q, i, axis=1), axis=1)
        gradient[:, i] = dq[:, i] * rest
        hessian[:, i, i] = -2.0 * rest
        for j in range(i + 1, d):
            cross = factor * dq[:, i] * dq[:, j] * np.prod(np.delete(q, [i, j], axis=1), axis=1)
            hessian[:, i, j] = hessian[:, j, i] = cross
    return _jet(value, gradient, hessian, rate * value)


def manufactured_1d() -> ControlProblem:
    """a = alpha on (0,1), A = {0.5, 1}; u = e^{-t} sin(pi x)."""

    def sigma(alpha: float, t: float, x: np.ndarray) -> np.ndarray:
        return np.full((x.shape[0], 1, 1), np.sqrt(2.0 * alpha))

    def cost(alpha: float, t: float, x: np.ndarray) -> np.ndarray:
        return (PI**2 - 1.0) * np.exp(-t) * np.sin(PI * x[:, 0])

    def exact(t: float, x: np.ndarray) -> np.ndarray:
        return np.exp(-t) * np.sin(PI * x[:, 0])

    def exact_jet(t: float, x: np.ndarray) -> FunctionJet:
        u = exact(t, x)
        grad = (PI * np.exp(-t) * np.cos(PI * x[:, 0])).reshape(-1, 1)
        return _jet(u, grad, (-(PI**2) * u).reshape(-1, 1, 1), -u)

    return ControlProblem(
        name="manufactured-1d",
        lower=(0.0,),
        upper=(1.0,),
        horizon=1.0,
        controls=(0.5, 1.0),
        sigma=sigma,
        drift=lambda alpha, t, x: _zeros(x.shape[0], 1),
        discount=lambda alpha, t, x: np.zeros(x.shape[0]),
        running_cost=cost,
        psi0=lambda x: np.sin(PI * x[:, 0]),
        psi1=lambda t, x: np.zeros(x.shape[0]),
        barrier=lambda t, x: parabola_barrier(x),
        exact_solution=exact,
        exact_jet=exact_jet,
        time_homogeneous=True,
        description="Two diffusion levels; the larger one is optimal everywhere since u >= 0 is concave.",
    )


def manufactured_2d() -> ControlProblem:
    """a = [[1, 0.3 alpha], [0.3 alpha, 1]], A = {-1, 1}; u = e^{-t} sin(pi x) sin(pi y)."""
    root = np.sqrt(1.0 - 0.09)

    def sigma(alpha: float, t: float, x: np.ndarray) -> np.ndarray:
        factor = np.sqrt(2.0) * np.array([[1.0, 0.0], [0.3 * alpha, root]])
        return np.broadcast_to(factor, (x.shape[0], 2, 2))

    def exact(t: float, x: np.ndarray) -> np.ndarray:
        return np.exp(-t) * np.sin(PI * x[:, 0]) * np.sin(PI * x[:, 1])

    def mixed(t: float, x: np.ndarray) -> np.ndarray:
        return np.exp(-t) * np.cos(PI * x[:, 0]) * np.cos(PI * x[:, 1])

    def cost(alpha: float, t: float, x: np.ndarray) -> np.ndarray:
        return (2.0 * PI**2 - 1.0) * exact(t, x) + 0.6 * PI**2 * np.abs(mixed(t, x))

    def exact_jet(t: float, x: np.ndarray) -> FunctionJet:
        u = exact(t, x)
        v = mixed(t, x)
        e = np.exp(-t)
        sx, sy = np.sin(PI * x[:, 0]), np.sin(PI * x[:, 1])
        cx, cy = np.cos(PI * x[:, 0]), np.cos(PI * x[:, 1])
        grad = PI * e * np.stack([cx * sy, sx * cy], axis=1)
        hess = np.empty((x.shape[0], 2, 2))
        hess[:, 0, 0] = hess[:, 1, 1] = -(PI**2) * u
        hess[:, 0, 1] = hess[:, 1, 0] = PI**2 * v
        return _jet(u, grad, hess, -u)

    return ControlProblem(
        name="manufactured-2d",
        lower=(0.0, 0.0),
        upper=(1.0, 1.0),
        horizon=1.0,
        controls=(-1.0, 1.0),
        sigma=sigma,
        drift=lambda alpha, t, x: _zeros(x.shape[0], 2),
        discount=lambda alpha, t, x: np.zeros(x.shape[0]),
        running_cost=cost,
        psi0=lambda x: exact(0.0, x),
        psi1=lambda t, x: np.zeros(x.shape[0]),
        exact_solution=exact,
        exact_jet=exact_jet,
        time_homogeneous=True,
        description="Diagonally dominant cross diffusion; the control picks the sign of the cross term.",
    )


def boundary_layer() -> ControlProblem:
    """u_t - x^2 (1-x)^2 u_xx / 2 + u = 0 with u = 1 on the parabolic boundary."""

    def sigma(alpha: float, t: float, x: np.ndarray) -> np.ndarray:
        s = x[:, 0]
        return (s * (1.0 - s)).reshape(-1, 1, 1)

    return ControlProblem(
        name="boundary-layer",
        lower=(0.0,),
        upper=(1.0,),
        horizon=2.0,
        controls=(0,),
        sigma=sigma,
        drift=lambda alpha, t, x: _zeros(x.shape[0], 1),
        discount=lambda alpha, t, x: np.full(x.shape[0], -1.0),
        running_cost=lambda alpha, t, x: np.zeros(x.shape[0]),
        psi0=lambda x: np.ones(x.shape[0]),
        psi1=lambda t, x: np.ones(x.shape[0]),
        time_homogeneous=True,
        description="Diffusion degenerates at both ends; no barrier exists and the strong problem has no solution.",
        metadata={"interior_limit": "exp(-t)"},
    )


def degenerate_drift(barrier_rate: float = 3.0, eta: float = 0.5) -> ControlProblem:
    """Pure outward transport b = alpha (2x - 1), A = {0.5, 1}.

    The barrier e^{rate t} x(1-x)/eta satisfies the generator inequality once
    rate >= 4 eta.
    """

    def drift(alpha: float, t: float, x: np.ndarray) -> np.ndarray:
        return (alpha * (2.0 * x[:, 0] - 1.0)).reshape(-1, 1)

    return ControlProblem(
        name="degenerate-drift",
        lower=(0.0,),
        upper=(1.0,),
        horizon=1.0,
        controls=(0.5, 1.0),
        sigma=lambda alpha, t, x: np.zeros((x.shape[0], 1, 1)),
        drift=drift,
        discount=lambda alpha, t, x: np.zeros(x.shape[0]),
        running_cost=lambda alpha, t, x: np.zeros(x.shape[0]),
        psi0=lambda x: np.sin(PI * x[:, 0]),
        psi1=lambda t, x: np.zeros(x.shape[0]),
        barrier=lambda t, x: parabola_barrier(x, scale=1.0 / eta, rate=barrier_rate, t=t),
        time_homogeneous=True,
        description="No diffusion; the drift points out of the domain at both ends.",
        metadata={"barrier_rate": barrier_rate, "eta": eta},
    )


BUILTIN_PROBLEMS: dict[str, Callable[[], ControlProblem]] = {
    "boundary-layer": boundary_layer,
    "manufactured-1d": manufactured_1d,
    "manufactured-2d": manufactured_2d,
    "degenerate-drift": degenerate_drift,
}


def builtin_problem(name: str) -> ControlProblem:
    factory = BUILTIN_PROBLEMS.get(name)
    if factory is None:
        raise ConfigError(f"Unknown builtin problem '{name}'. Choose from: {', '.join(sorted(BUILTIN_PROBLEMS))}")
    return factory()
