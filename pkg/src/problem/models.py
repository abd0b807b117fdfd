from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Sequence

import numpy as np

from src.errors import ConfigError
from src.grid.space_time import SpaceTimeGrid, build_grid

Control = Any
# (control, t, x[n, d]) -> array; shapes are normalized by ControlProblem.
CoefficientField = Callable[[Control, float, np.ndarray], Any]
SpatialField = Callable[[np.ndarray], Any]
SpaceTimeField = Callable[[float, np.ndarray], Any]


@dataclass(frozen=True, eq=False)
class FunctionJet:
    """Values and derivatives of a smooth function at n points."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    time_derivative: np.ndarray


BarrierValue = FunctionJet
JetField = Callable[[float, np.ndarray], FunctionJet]


@dataclass(frozen=True, eq=False)
class ControlProblem:
    name: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    horizon: float
    controls: tuple[Control, ...]
    sigma: CoefficientField
    drift: CoefficientField
    discount: CoefficientField
    running_cost: CoefficientField
    psi0: SpatialField
    psi1: SpaceTimeField
    barrier: Optional[JetField] = None
    exact_solution: Optional[SpaceTimeField] = None
    exact_jet: Optional[JetField] = None
    time_homogeneous: bool = False
    description: str = ""
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.controls:
            raise ConfigError(f"Problem '{self.name}' needs a nonempty control set")
        if len(self.lower) != len(self.upper):
            raise ConfigError(f"Problem '{self.name}' has mismatched domain corners")
        if not self.horizon > 0:
            raise ConfigError(f"Problem '{self.name}' needs a positive horizon, got {self.horizon}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def sigma_at(self, control: Control, t: float, x: np.ndarray) -> np.ndarray:
        pts = self._points(x)
        raw = np.asarray(self.sigma(control, t, pts), dtype=float)
        n, d = pts.shape
        if raw.ndim == 0 or (raw.ndim == 1 and d == 1):
            return np.broadcast_to(raw.reshape(-1, 1, 1), (n, 1, 1)).astype(float)
        if raw.ndim == 2 and raw.shape[0] == d:
            return np.broadcast_to(raw, (n,) + raw.shape).astype(float)
        if raw.ndim == 3 and raw.shape[0] == n and raw.shape[1] == d:
            return raw
        raise ConfigError(f"sigma of '{self.name}' returned shape {raw.shape}; expected (n, {d}, P)")

    def diffusion(self, control: Control, t: float, x: np.ndarray) -> np.ndarray:
        s = self.sigma_at(control, t, x)
        return 0.5 * np.einsum("nip,njp->nij", s, s)

    def drift_at(self, control: Control, t: float, x: np.ndarray) -> np.ndarray:
        pts = self._points(x)
        raw = np.asarray(self.drift(control, t, pts), dtype=float)
        n, d = pts.shape
        if raw.shape == (n, d):
            return raw
        if raw.ndim == 0:
            return np.full((n, d), float(raw))
        if raw.ndim == 1 and d == 1 and raw.shape[0] == n:
            return raw.reshape(n, 1)
        if raw.ndim == 1 and raw.shape[0] == d:
            return np.broadcast_to(raw, (n, d)).astype(float)
        raise ConfigError(f"drift of '{self.name}' returned shape {raw.shape}; expected ({n}, {d})")

    def discount_at(self, control: Control, t: float, x: np.ndarray) -> np.ndarray:
        return self._scalar_field(self.discount(control, t, self._points(x)), x, "discount")

    def cost_at(self, control: Control, t: float, x: np.ndarray) -> np.ndarray:
        return self._scalar_field(self.running_cost(control, t, self._points(x)), x, "running_cost")

    def initial_values(self, x: np.ndarray) -> np.ndarray:
        return self._scalar_field(self.psi0(self._points(x)), x, "psi0")

    def boundary_values(self, t: float, x: np.ndarray) -> np.ndarray:
        return self._scalar_field(self.psi1(t, self._points(x)), x, "psi1")

    def exact_values(self, t: float, x: np.ndarray) -> np.ndarray:
        if self.exact_solution is None:
            raise ConfigError(f"Problem '{self.name}' has no exact solution")
        return self._scalar_field(self.exact_solution(t, self._points(x)), x, "exact_solution")

    def operator(self, control: Control, t: float, x: np.ndarray, jet: FunctionJet) -> np.ndarray:
        """L^alpha(t, x, s, q, X) = -tr[aX] - b.q - c s - l evaluated on a jet."""
        pts = self._points(x)
        a = self.diffusion(control, t, pts)
        b = self.drift_at(control, t, pts)
        c = self.discount_at(control, t, pts)
        ell = self.cost_at(control, t, pts)
        trace = np.einsum("nij,nij->n", a, jet.hessian)
        return -trace - np.einsum("ni,ni->n", b, jet.gradient) - c * jet.value - ell

    def hamiltonian_residual(self, t: float, x: np.ndarray, jet: FunctionJet) -> np.ndarray:
        """phi_t + max over controls of L^alpha[phi]."""
        values = np.stack([self.operator(alpha, t, x, jet) for alpha in self.controls])
        return jet.time_derivative + values.max(axis=0)

    def with_controls(self, subset: Sequence[Control]) -> ControlProblem:
        chosen = tuple(subset)
        missing = [alpha for alpha in chosen if alpha not in self.controls]
        if missing:
            raise ConfigError(f"Controls {missing} are not part of problem '{self.name}'")
        return replace(self, controls=chosen)

    def build_grid(self, nodes_per_axis: Sequence[int], dt: float) -> SpaceTimeGrid:
        n_steps = max(1, int(round(self.horizon / dt)))
        return build_grid(self.lower, self.upper, nodes_per_axis, self.horizon / n_steps, n_steps)

    def grid_for(self, dx: float, dt: float) -> SpaceTimeGrid:
        nodes = [int(round((hi - lo) / dx)) + 1 for lo, hi in zip(self.lower, self.upper)]
        return self.build_grid(nodes, dt)

    def _points(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dim)
        return pts

    def _scalar_field(self, raw: Any, x: np.ndarray, label: str) -> np.ndarray:
        n = self._points(x).shape[0]
        arr = np.asarray(raw, dtype=float).reshape(-1)
        if arr.shape[0] not in (1, n):
            raise ConfigError(f"{label} of '{self.name}' returned {arr.shape[0]} values for {n} points")
        return np.broadcast_to(arr, (n,)).astype(float)


@dataclass
class AuditReport:
    assumption: str
    sampled_max: float
    sample_count: int
    passed: bool
    witness: Optional[dict[str, Any]] = None
    details: dict[str, Any] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "assumption": self.assumption,
            "sampled_max": self.sampled_max,
            "sample_count": self.sample_count,
            "passed": self.passed,
            "witness": self.witness,
            "details": self.details,
            "flags": list(self.flags),
        }
