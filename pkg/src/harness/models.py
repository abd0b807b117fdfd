from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Optional

REPORT_SCHEMA_VERSION = 1


@dataclass
class RungResult:
    dx: float
    dt: float
    err_global: float
    err_interior: float
    order: Optional[float] = None


@dataclass
class ConvergenceReport:
    problem: str
    scheme: str
    theta: float
    rungs: list[RungResult]
    fitted_order: float
    fitted_order_interior: float
    refinement_power: float
    lower_exponents: tuple[float, float]
    upper_exponents: tuple[float, float]
    lower_order: float
    upper_order: float
    monotone: bool
    reference: str
    refinement: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.fitted_order >= self.lower_order - 0.05 and self.monotone

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["dx", "dt", "err_global", "err_interior", "order"],
            [[r.dx, r.dt, r.err_global, r.err_interior, r.order] for r in self.rungs],
        )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class ConsistencyReport:
    problem: str
    scheme: str
    theta: float
    family: str
    dx: float
    dt: float
    eps: list[float]
    truncation: list[float]
    features: list[list[float]]
    coefficients: list[float]
    relative_residual: float
    theta_term_share: float

    @property
    def passed(self) -> bool:
        if self.family == "smooth":
            spread = max(self.truncation) - min(self.truncation)
            return spread <= 1e-12 * max(1.0, max(self.truncation))
        ok = self.relative_residual <= 0.15
        if abs(self.theta - 0.5) < 1e-12:
            ok = ok and self.theta_term_share <= 0.01
        return ok

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["eps", "truncation", "theta_term", "time_term", "space_term"],
            [[e, y, *f] for e, y, f in zip(self.eps, self.truncation, self.features)],
        )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class BarrierRung:
    dx: float
    dt: float
    K: float
    mismatch: float


@dataclass
class BarrierReport:
    problem: str
    scheme: str
    rungs: list[BarrierRung]
    continuous_K: Optional[float] = None

    @property
    def ratio(self) -> float:
        values = [r.K for r in self.rungs]
        low = min(values)
        return float("inf") if low <= 0.0 else max(values) / low

    @property
    def passed(self) -> bool:
        return all(r.K < float("inf") for r in self.rungs) and self.ratio <= 2.0

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (["dx", "dt", "K", "mismatch"], [[r.dx, r.dt, r.K, r.mismatch] for r in self.rungs])

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.update({"ratio": self.ratio, "passed": self.passed})
        return out


@dataclass
class SwitchingRung:
    k: float
    gap: float
    min_excess: float
    feasibility: float
    sweeps: int


@dataclass
class SwitchingReport:
    problem: str
    scheme: str
    modes: list[list[Any]]
    rungs: list[SwitchingRung]
    order: float
    lower_ok: bool
    monotone: bool

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.monotone and self.order >= 1.0 / 3.0 - 0.05

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["k", "gap", "min_excess", "feasibility", "sweeps"],
            [[r.k, r.gap, r.min_excess, r.feasibility, r.sweeps] for r in self.rungs],
        )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class DependenceSeries:
    kind: str
    deltas: list[float]
    differences: list[float]
    exponent: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.exponent >= self.threshold


@dataclass
class DependenceReport:
    problem: str
    scheme: str
    series: list[DependenceSeries]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.series)

    def table(self) -> tuple[list[str], list[list[Any]]]:
        rows = [[s.kind, d, diff] for s in self.series for d, diff in zip(s.deltas, s.differences)]
        return ["kind", "delta", "sup_difference"], rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem": self.problem,
            "scheme": self.scheme,
            "series": [{**asdict(s), "passed": s.passed} for s in self.series],
            "passed": self.passed,
        }


@dataclass
class BoundaryLayerReport:
    dx: float
    dt: float
    safety: float
    n_steps: int
    u1_final: float
    lower_bound: float
    interior_value: float
    interior_err: float
    gap: float
    limit: float
    bound_slack: float
    monotonicity_slack: float
    history: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.bound_slack >= -1e-12 and self.lower_bound > 0.25 and self.interior_err <= 0.02

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return ["t", "u1", "lower_bound"], [list(row) for row in self.history]

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.pop("history")
        out["passed"] = self.passed
        return out


@dataclass
class ComparisonRung:
    delta: float
    mu: float
    max_excess: float
    ordered: bool
    violations: int


@dataclass
class ComparisonReport:
    problem: str
    scheme: str
    mu: float
    mu_spread: float
    rungs: list[ComparisonRung]

    @property
    def passed(self) -> bool:
        return all(r.ordered and r.violations == 0 for r in self.rungs) and self.mu_spread <= 0.1 * max(1.0, self.mu)

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["delta", "mu", "max_excess", "ordered", "violations"],
            [[r.delta, r.mu, r.max_excess, r.ordered, r.violations] for r in self.rungs],
        )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class MonotonicityCase:
    scheme: str
    theta: float
    dt: float
    pairs: int
    violations: int
    min_gap: float


@dataclass
class MonotonicityReport:
    problem: str
    seed: int
    cases: list[MonotonicityCase]

    @property
    def passed(self) -> bool:
        return all(c.violations == 0 for c in self.cases)

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["scheme", "theta", "dt", "pairs", "violations", "min_gap"],
            [[c.scheme, c.theta, c.dt, c.pairs, c.violations, c.min_gap] for c in self.cases],
        )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class HowardInstance:
    index: int
    iterations: int
    value_iteration_sweeps: int
    error_vs_value_iteration: float
    initialization_gap: float


@dataclass
class HowardCheckReport:
    seed: int
    nodes: int
    controls: int
    instances: list[HowardInstance]

    @property
    def passed(self) -> bool:
        return all(
            i.iterations <= 10 and i.error_vs_value_iteration <= 1e-9 and i.initialization_gap <= 1e-9
            for i in self.instances
        )

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["instance", "iterations", "vi_sweeps", "error_vs_vi", "init_gap"],
            [
                [i.index, i.iterations, i.value_iteration_sweeps, i.error_vs_value_iteration, i.initialization_gap]
                for i in self.instances
            ],
        )

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class SmoothingStudyReport:
    problem: str
    entries: list[dict[str, Any]]

    @property
    def error_ratios(self) -> list[float]:
        return [e["sup_error"] / e["eps"] for e in self.entries]

    @property
    def ratio_spread(self) -> float:
        ratios = self.error_ratios
        low = min(ratios)
        if low <= 0.0:
            return 1.0 if max(ratios) <= 0.0 else float("inf")
        return max(ratios) / low

    @property
    def passed(self) -> bool:
        lipschitz_ok = all(e["lipschitz_smoothed"] <= e["lipschitz_initial"] + 1e-6 for e in self.entries)
        return lipschitz_ok and self.ratio_spread <= 2.0

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["eps", "sup_error", "error_over_eps", "lipschitz_smoothed"],
            [[e["eps"], e["sup_error"], r, e["lipschitz_smoothed"]] for e, r in zip(self.entries, self.error_ratios)],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem": self.problem,
            "entries": self.entries,
            "ratio_spread": self.ratio_spread,
            "passed": self.passed,
        }


@dataclass
class CflRung:
    dx: float
    bound: float
    checked_fractions: list[float]
    all_positive: bool


@dataclass
class CflReport:
    problem: str
    theta: float
    rungs: list[CflRung]
    exponent: float

    @property
    def passed(self) -> bool:
        in_range = self.theta >= 1.0 or 1.4 <= self.exponent <= 1.6
        return in_range and all(r.all_positive for r in self.rungs)

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return ["dx", "cfl_bound", "positive"], [[r.dx, r.bound, r.all_positive] for r in self.rungs]

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class AuditBundle:
    problem: str
    reports: list[dict[str, Any]]
    skipped: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.reports)

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return (
            ["assumption", "sampled_max", "samples", "passed"],
            [[r["assumption"], r["sampled_max"], r["sample_count"], r["passed"]] for r in self.reports],
        )

    def to_dict(self) -> dict[str, Any]:
        return {"problem": self.problem, "reports": self.reports, "skipped": self.skipped, "passed": self.passed}


@dataclass
class SolveReport:
    problem: str
    scheme: str
    theta: float
    dx: float
    dt: float
    n_steps: int
    final_error: Optional[float]
    samples: list[tuple[float, float, Optional[float]]]
    diagnostics: dict[str, Any]

    @property
    def passed(self) -> bool:
        return bool(self.diagnostics.get("sup_bound_ok", True))

    def table(self) -> tuple[list[str], list[list[Any]]]:
        return ["t", "sup_norm", "error"], [list(s) for s in self.samples]

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.pop("samples")
        out["passed"] = self.passed
        return out


def envelope(command: str, report: Any) -> dict[str, Any]:
    """Report body with the schema header; keys of the body stay at top level."""
    return {"schema_version": REPORT_SCHEMA_VERSION, "command": command, **report.to_dict(), "passed": report.passed}
