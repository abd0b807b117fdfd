"""JSON/YAML problem files: a builtin name or a full coefficient definition."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError
from src.problem.builtins import BUILTIN_PROBLEMS, builtin_problem, parabola_barrier
from src.problem.expressions import Expression, parse_expression
from src.problem.models import ControlProblem
from src.schemes.models import SchemeKind

Scalar = Union[str, float]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainSection(_Section):
    lower: list[float]
    upper: list[float]
    horizon: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_box(self) -> DomainSection:
        if len(self.lower) != len(self.upper):
            raise ValueError("domain.lower and domain.upper must have the same length")
        if not 1 <= len(self.lower) <= 2:
            raise ValueError(f"Only 1-D and 2-D domains are supported, got dimension {len(self.lower)}")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("domain.upper must exceed domain.lower on every axis")
        return self


class GridSection(_Section):
    dx: float = Field(default=1.0 / 32.0, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)


class SolverSection(_Section):
    scheme: SchemeKind = SchemeKind.SL
    theta: float = Field(default=1.0, ge=0.0, le=1.0)
    policy_tol: Optional[float] = Field(default=None, gt=0)
    policy_max_iters: Optional[int] = Field(default=None, ge=1)
    linear_tol: Optional[float] = Field(default=None, gt=0)
    stencil_step: Optional[float] = Field(default=None, gt=0)


class BarrierSection(_Section):
    kind: Literal["parabola"] = "parabola"
    scale: float = Field(default=1.0, gt=0)
    rate: float = Field(default=0.0, ge=0)


class CoefficientSection(_Section):
    sigma: Union[Scalar, list[list[Scalar]]]
    drift: Union[Scalar, list[Scalar]] = 0.0
    discount: Scalar = 0.0
    running_cost: Scalar = 0.0

    @field_validator("sigma", "drift", "discount", "running_cost")
    @classmethod
    def _parseable(cls, value: Any) -> Any:
        for source in _sources(value):
            parse_expression(source)
        return value


class ProblemFile(_Section):
    name: str = "custom"
    builtin: Optional[str] = None
    domain: Optional[DomainSection] = None
    controls: Optional[list[float]] = None
    coefficients: Optional[CoefficientSection] = None
    initial: Optional[Scalar] = None
    boundary: Optional[Scalar] = None
    exact: Optional[Scalar] = None
    barrier: Optional[BarrierSection] = None
    grid: GridSection = Field(default_factory=GridSection)
    solver: SolverSection = Field(default_factory=SolverSection)

    @field_validator("initial", "boundary", "exact")
    @classmethod
    def _parseable(cls, value: Optional[Scalar]) -> Optional[Scalar]:
        if value is not None:
            parse_expression(value)
        return value

    @model_validator(mode="after")
    def _builtin_or_definition(self) -> ProblemFile:
        required = {
            "domain": self.domain,
            "controls": self.controls,
            "coefficients": self.coefficients,
            "initial": self.initial,
            "boundary": self.boundary,
        }
        if self.builtin is not None:
            if self.builtin not in BUILTIN_PROBLEMS:
                raise ValueError(f"Unknown builtin '{self.builtin}'. Choose from: {', '.join(sorted(BUILTIN_PROBLEMS))}")
            given = [key for key, value in required.items() if value is not None]
            if given:
                raise ValueError(f"A builtin problem cannot also define {', '.join(given)}")
            return self
        missing = [key for key, value in required.items() if value is None]
        if missing:
            raise ValueError(f"Problem definition is missing {', '.join(missing)}")
        if not self.controls:
            raise ValueError("controls must be a nonempty list")
        dim = len(self.domain.lower)
        coeffs = self.coefficients
        if dim > 1 and not isinstance(coeffs.sigma, list):
            raise ValueError("sigma must be a matrix of expressions in 2-D")
        if isinstance(coeffs.sigma, list) and any(len(row) != len(coeffs.sigma[0]) for row in coeffs.sigma):
            raise ValueError("sigma rows must have equal length")
        if isinstance(coeffs.sigma, list) and len(coeffs.sigma) != dim:
            raise ValueError(f"sigma needs {dim} rows, got {len(coeffs.sigma)}")
        if isinstance(coeffs.drift, list) and len(coeffs.drift) != dim:
            raise ValueError(f"drift needs {dim} entries, got {len(coeffs.drift)}")
        return self


def load_problem_file(path: str) -> tuple[ControlProblem, GridSection, SolverSection]:
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Problem file not found: {file_path}")
    with file_path.open("r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{file_path.name} must contain a top-level mapping")
    try:
        definition = ProblemFile.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid problem file {file_path.name}: {exc}") from exc
    return build_problem(definition), definition.grid, definition.solver


def build_problem(definition: ProblemFile) -> ControlProblem:
    if definition.builtin is not None:
        return builtin_problem(definition.builtin)
    domain, coeffs = definition.domain, definition.coefficients
    dim = len(domain.lower)

    sigma = _matrix_field(coeffs.sigma)
    drift = _vector_field(coeffs.drift, dim)
    discount = _scalar_field(parse_expression(coeffs.discount))
    cost = _scalar_field(parse_expression(coeffs.running_cost))
    psi0 = parse_expression(definition.initial)
    psi1 = parse_expression(definition.boundary)
    if "alpha" in psi0.variables | psi1.variables:
        raise ConfigError("Initial and boundary data cannot depend on alpha")
    exact = None if definition.exact is None else parse_expression(definition.exact)

    barrier = None
    if definition.barrier is not None:
        section = definition.barrier

        def parabola(t: float, x: np.ndarray):
            return parabola_barrier(x, section.scale, section.rate, t, domain.lower, domain.upper)

        barrier = parabola

    homogeneous = all(
        "t" not in parse_expression(source).variables
        for value in (coeffs.sigma, coeffs.drift, coeffs.discount)
        for source in _sources(value)
    )
    return ControlProblem(
        name=definition.name,
        lower=tuple(domain.lower),
        upper=tuple(domain.upper),
        horizon=domain.horizon,
        controls=tuple(definition.controls),
        sigma=sigma,
        drift=drift,
        discount=discount,
        running_cost=cost,
        psi0=lambda x: _evaluate(psi0, 0.0, x, None),
        psi1=lambda t, x: _evaluate(psi1, t, x, None),
        barrier=barrier,
        exact_solution=None if exact is None else (lambda t, x: _evaluate(exact, t, x, None)),
        time_homogeneous=homogeneous,
        description=f"Loaded from a problem file ({dim}-D, {len(definition.controls)} controls)",
    )


def _sources(value: Any) -> list[Scalar]:
    return np.ravel(np.asarray(value, dtype=object)).tolist()


def _env(t: float, x: np.ndarray, alpha: Any) -> dict[str, Any]:
    env: dict[str, Any] = {"t": t, "alpha": alpha, "x1": x[:, 0]}
    if x.shape[1] > 1:
        env["x2"] = x[:, 1]
    return env


def _evaluate(expr: Expression, t: float, x: np.ndarray, alpha: Any) -> np.ndarray:
    env = {key: value for key, value in _env(t, x, alpha).items() if key in expr.variables}
    if "alpha" in expr.variables and alpha is None:
        raise ConfigError(f"Expression '{expr.source}' uses alpha where no control applies")
    return np.broadcast_to(expr(**env), (x.shape[0],)).astype(float)


def _scalar_field(expr: Expression):
    return lambda alpha, t, x: _evaluate(expr, t, x, alpha)


def _vector_field(source: Union[Scalar, list[Scalar]], dim: int):
    entries = [parse_expression(s) for s in (source if isinstance(source, list) else [source] * dim)]
    return lambda alpha, t, x: np.stack([_evaluate(e, t, x, alpha) for e in entries], axis=1)


def _matrix_field(source: Union[Scalar, list[list[Scalar]]]):
    rows = source if isinstance(source, list) else [[source]]
    parsed = [[parse_expression(s) for s in row] for row in rows]

    def sigma(alpha: Any, t: float, x: np.ndarray) -> np.ndarray:
        return np.stack([np.stack([_evaluate(e, t, x, alpha) for e in row], axis=1) for row in parsed], axis=1)

    return sigma
