from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy import sparse

from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.schemes.models import PositivityReport


@dataclass(frozen=True)
class SolverConfig:
    theta: float = 1.0
    policy_tol: float = 1e-10
    policy_max_iters: int = 100
    linear_tol: float = 1e-12
    mu_estimate: float = 0.0
    store_stride: int = 1
    sup_bound_slack: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if not (self.policy_tol > 0 and self.linear_tol > 0 and self.sup_bound_slack > 0):
            raise ValueError("Solver tolerances must be positive")
        if self.policy_max_iters < 1:
            raise ValueError(f"policy_max_iters must be >= 1, got {self.policy_max_iters}")
        if self.store_stride < 1:
            raise ValueError(f"store_stride must be >= 1, got {self.store_stride}")


@dataclass(frozen=True, eq=False)
class PolicySystem:
    """Per-control linear pieces of F(r) = max_a (A_a r - f_a)."""

    matrices: Sequence[sparse.csr_matrix]
    rhs: Sequence[np.ndarray]

    def __post_init__(self) -> None:
        if not self.matrices or len(self.matrices) != len(self.rhs):
            raise ValueError("PolicySystem needs one matrix and one right-hand side per control")

    @property
    def size(self) -> int:
        return int(self.rhs[0].shape[0])

    def residuals(self, r: np.ndarray) -> np.ndarray:
        return np.stack([A @ r - f for A, f in zip(self.matrices, self.rhs)])

    def frozen(self, policy: np.ndarray) -> tuple[sparse.csr_matrix, np.ndarray]:
        matrix = None
        rhs = np.zeros(self.size)
        for k, (A, f) in enumerate(zip(self.matrices, self.rhs)):
            mask = policy == k
            if not mask.any():
                continue
            picked = sparse.diags(mask.astype(float)) @ A
            matrix = picked if matrix is None else matrix + picked
            rhs[mask] = f[mask]
        assert matrix is not None
        return matrix.tocsc(), rhs


@dataclass
class HowardResult:
    values: np.ndarray
    policy: np.ndarray
    iterations: int
    linear_solves: int
    policy_changes: int
    residual: float
    monotone: bool


@dataclass
class StepResult:
    level: GridFunction
    policy: np.ndarray
    howard: Optional[HowardResult] = None


@dataclass
class SolveDiagnostics:
    howard_iterations: list[int] = field(default_factory=list)
    linear_solves: int = 0
    policy_changes: int = 0
    max_residual: float = 0.0
    howard_monotone: bool = True
    sup_bound_slack: float = np.inf
    sup_bound_ok: bool = True
    growth_rate: float = 0.0
    positivity: Optional[PositivityReport] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "howard_iterations_max": max(self.howard_iterations, default=0),
            "howard_iterations_total": int(sum(self.howard_iterations)),
            "linear_solves": self.linear_solves,
            "policy_changes": self.policy_changes,
            "max_residual": self.max_residual,
            "howard_monotone": self.howard_monotone,
            "sup_bound_slack": self.sup_bound_slack,
            "sup_bound_ok": self.sup_bound_ok,
            "growth_rate": self.growth_rate,
            "positivity": None if self.positivity is None else self.positivity.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class Solution:
    grid: SpaceTimeGrid
    levels: tuple[GridFunction, ...]
    policies: tuple[np.ndarray, ...]
    diagnostics: SolveDiagnostics

    @property
    def stored_levels(self) -> tuple[int, ...]:
        return tuple(f.time_level for f in self.levels)

    def level(self, n: int) -> GridFunction:
        for f in self.levels:
            if f.time_level == n:
                return f
        raise KeyError(f"Time level {n} was not stored (stored: {self.stored_levels[:5]}...)")

    def policy(self, n: int) -> np.ndarray:
        for f, pol in zip(self.levels, self.policies):
            if f.time_level == n:
                return pol
        raise KeyError(f"Time level {n} was not stored")

    @property
    def final(self) -> GridFunction:
        return self.levels[-1]

    def as_array(self) -> np.ndarray:
        return np.stack([f.values for f in self.levels])


@dataclass(frozen=True, eq=False)
class SwitchingState:
    M: int
    k: float
    modes: tuple[tuple[Any, ...], ...]
    solutions: tuple[Solution, ...]
    feasibility_max: float
    projection_sweeps_max: int
    residual_max: float

    def __post_init__(self) -> None:
        if not self.k > 0:
            raise ValueError(f"Switching cost must be positive, got {self.k}")

    def mode_minimum(self, n: int) -> np.ndarray:
        return np.min(np.stack([s.level(n).values for s in self.solutions]), axis=0)
