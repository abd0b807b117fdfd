from __future__ import annotations

import asyncio
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Awaitable, Callable, Optional

import numpy as np

from src.config.problem_file import GridSection, SolverSection, load_problem_file
from src.config.settings import HarnessConfig
from src.errors import ConfigError
from src.grid.space_time import GridFunction, SpaceTimeGrid
from src.harness.barrier import barrier_audit
from src.harness.boundary_layer import boundary_layer_demo
from src.harness.comparison import comparison_probe
from src.harness.consistency import consistency_probe
from src.harness.convergence import convergence_study
from src.harness.dependence import continuous_dependence_probe
from src.harness.models import AuditBundle, SolveReport, envelope
from src.harness.properties import cfl_study, howard_check, monotonicity_sweep, smoothing_study
from src.harness.rungs import TimeStepRule, grid_with_step, rung_grid, solver_config
from src.harness.switching_study import switching_study
from src.logging.run_logger import RunLogger
from src.problem.audits import audit_A1, audit_A2, audit_A3
from src.problem.builtins import BUILTIN_PROBLEMS, builtin_problem
from src.problem.models import ControlProblem
from src.schemes import SchemeKind, SLConfig, build_scheme
from src.solver.engine import HJBSolver
from src.ui.report_display import ReportDisplay

DEFAULT_PROBLEM = "manufactured-1d"
DEFAULT_CFL_SAFETY = 0.9
SOLVE_SAMPLES = 50

Handler = Callable[[dict[str, Any], RunLogger], Awaitable[Any]]


@dataclass(frozen=True)
class _ProblemSetup:
    """Problem plus the grid/solver defaults a problem file may carry."""

    problem: ControlProblem
    grid: Optional[GridSection] = None
    solver: Optional[SolverSection] = None


class HarnessOrchestrator:
    def __init__(
        self,
        config: HarnessConfig,
        out: Optional[str] = None,
        quiet: bool = False,
        display: Optional[ReportDisplay] = None,
    ):
        self.config = config
        self.out = out or config.log_root
        self.quiet = quiet or config.quiet
        self.display = display or ReportDisplay()
        self.handlers: dict[str, Handler] = {
            "solve": self._solve,
            "converge": self._converge,
            "consistency": self._consistency,
            "barrier-audit": self._barrier_audit,
            "switching": self._switching,
            "dependence": self._dependence,
            "boundary-layer": self._boundary_layer,
            "audit": self._audit,
            "comparison": self._comparison,
            "monotonicity": self._monotonicity,
            "howard-check": self._howard_check,
            "smoothing": self._smoothing,
            "cfl": self._cfl,
        }

    async def run(self, command: str, options: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        """Run one harness command, write report.json and table.csv, and return the report body."""
        handler = self.handlers.get(command)
        if handler is None:
            raise ConfigError(f"Unknown command '{command}'. Choose from: {', '.join(self.handlers)}")
        opts = {key: value for key, value in (options or {}).items() if value is not None}
        logger = RunLogger(root=self.out, run_id=f"{command}-{str(uuid.uuid4())[:8]}")
        logger.log_event("run_started", command, {"options": opts, "seed": self.config.seed})
        try:
            report = await handler(opts, logger)
        except Exception as exc:  # noqa: BLE001
            logger.log_event("run_failed", command, {"error": str(exc), "kind": type(exc).__name__})
            raise

        body = envelope(command, report)
        columns, rows = report.table()
        logger.write_report(body)
        logger.write_table(columns, rows, gnuplot=bool(opts.get("gnuplot", False)))
        logger.log_event("run_completed", command, {"passed": body["passed"]})
        if not self.quiet:
            self.display.show(body, columns, rows, logger.run_path())
        return {**body, "run_path": logger.run_path()}

    def _setup(self, opts: dict[str, Any]) -> _ProblemSetup:
        source = str(opts.get("problem", DEFAULT_PROBLEM))
        if source in BUILTIN_PROBLEMS:
            return _ProblemSetup(builtin_problem(source))
        if Path(source).suffix.lower() in (".json", ".yml", ".yaml") or Path(source).exists():
            problem, grid, solver = load_problem_file(source)
            return _ProblemSetup(problem, grid, solver)
        raise ConfigError(f"Unknown problem '{source}'. Use a builtin ({', '.join(sorted(BUILTIN_PROBLEMS))}) or a file")

    def _config(self, setup: _ProblemSetup) -> HarnessConfig:
        solver = setup.solver
        if solver is None:
            return self.config
        overrides = {
            key: getattr(solver, key)
            for key in ("policy_tol", "policy_max_iters", "linear_tol")
            if getattr(solver, key) is not None
        }
        return replace(self.config, **overrides)

    def _kind(self, opts: dict[str, Any], setup: _ProblemSetup) -> SchemeKind:
        if "scheme" in opts:
            return SchemeKind(opts["scheme"])
        return setup.solver.scheme if setup.solver is not None else SchemeKind.SL

    def _theta(self, opts: dict[str, Any], setup: _ProblemSetup) -> float:
        if "theta" in opts:
            return float(opts["theta"])
        return setup.solver.theta if setup.solver is not None else 1.0

    def _sl_config(self, opts: dict[str, Any], setup: _ProblemSetup, theta: float) -> SLConfig:
        step = opts.get("stencil_step")
        if step is None and setup.solver is not None:
            step = setup.solver.stencil_step
        if step is None:
            step = self.config.stencil_step
        return SLConfig(theta=theta, stencil_step=step)

    def _rule(self, opts: dict[str, Any]) -> TimeStepRule:
        return TimeStepRule(
            factor=float(opts.get("dt_factor", 1.0)),
            power=float(opts.get("dt_power", 1.0)),
            cfl_safety=float(opts.get("cfl_safety", DEFAULT_CFL_SAFETY)),
        )

    def _dx(self, opts: dict[str, Any], setup: _ProblemSetup, default: float) -> float:
        if "dx" in opts:
            return float(opts["dx"])
        return setup.grid.dx if setup.grid is not None else default

    def _grid(self, opts: dict[str, Any], setup: _ProblemSetup, kind: SchemeKind, theta: float) -> SpaceTimeGrid:
        dx = self._dx(opts, setup, 1.0 / 32.0)
        dt = opts.get("dt")
        if dt is None and setup.grid is not None:
            dt = setup.grid.dt
        if dt is not None:
            return grid_with_step(setup.problem, dx, float(dt))
        return rung_grid(setup.problem, kind, theta, dx, self._rule(opts), self._sl_config(opts, setup, theta))

    async def _solve(self, opts: dict[str, Any], logger: RunLogger) -> SolveReport:
        setup = self._setup(opts)
        problem = setup.problem
        kind = self._kind(opts, setup)
        theta = self._theta(opts, setup)
        grid = self._grid(opts, setup, kind, theta)
        cfg = solver_config(self._config(setup), theta, store_stride=grid.n_steps)
        scheme = build_scheme(kind, problem, grid, self._sl_config(opts, setup, theta))
        every = max(1, grid.n_steps // SOLVE_SAMPLES)
        exact = problem.exact_solution is not None
        samples: list[tuple[float, float, Optional[float]]] = []

        def record(level: GridFunction, policy: np.ndarray) -> None:
            if level.time_level % every and level.time_level != grid.n_steps:
                return
            error = None
            if exact:
                error = float(np.max(np.abs(level.values - problem.exact_values(level.time, grid.points))))
            samples.append((level.time, level.sup_norm(), error))

        solution = await asyncio.to_thread(HJBSolver(problem, scheme, cfg, logger).solve, record)
        return SolveReport(
            problem=problem.name,
            scheme=kind.value,
            theta=theta,
            dx=grid.dx_min,
            dt=grid.dt,
            n_steps=grid.n_steps,
            final_error=samples[-1][2] if samples else None,
            samples=samples,
            diagnostics=solution.diagnostics.to_dict(),
        )

    async def _converge(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        kind = self._kind(opts, setup)
        theta = self._theta(opts, setup)
        default = self.config.kd_ladder if kind is SchemeKind.KD else self.config.sl_ladder
        return await convergence_study(
            setup.problem,
            kind,
            theta,
            opts.get("ladder", default),
            self._rule(opts),
            config=self._config(setup),
            sl_config=self._sl_config(opts, setup, theta),
            logger=logger,
        )

    async def _consistency(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        kind = self._kind(opts, setup)
        theta = self._theta(opts, setup)
        return await asyncio.to_thread(
            consistency_probe,
            setup.problem,
            kind,
            theta,
            self._dx(opts, setup, 1.0 / 128.0),
            opts.get("eps", self.config.eps_ladder),
            opts.get("family", "kink"),
            self._sl_config(opts, setup, theta),
            logger,
        )

    async def _barrier_audit(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        kind = self._kind(opts, setup)
        theta = self._theta(opts, setup)
        return await barrier_audit(
            setup.problem,
            kind,
            theta,
            opts.get("ladder", self.config.barrier_ladder),
            self._rule(opts),
            config=self._config(setup),
            sl_config=self._sl_config(opts, setup, theta),
            logger=logger,
        )

    async def _switching(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        kind = self._kind(opts, setup)
        theta = self._theta(opts, setup)
        modes = opts.get("modes") or [[alpha] for alpha in setup.problem.controls]
        return await switching_study(
            setup.problem,
            kind,
            theta,
            self._grid(opts, setup, kind, theta),
            modes,
            opts.get("k", self.config.k_ladder),
            config=self._config(setup),
            sl_config=self._sl_config(opts, setup, theta),
            logger=logger,
        )

    async def _dependence(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        kind = self._kind(opts, setup)
        theta = self._theta(opts, setup)
        extra = {"kinds": opts["kinds"]} if "kinds" in opts else {}
        return await continuous_dependence_probe(
            setup.problem,
            kind,
            theta,
            self._grid(opts, setup, kind, theta),
            opts.get("deltas", self.config.delta_ladder),
            config=self._config(setup),
            sl_config=self._sl_config(opts, setup, theta),
            logger=logger,
            **extra,
        )

    async def _boundary_layer(self, opts: dict[str, Any], logger: RunLogger):
        return await asyncio.to_thread(
            boundary_layer_demo,
            float(opts.get("dx", 1.0 / 64.0)),
            float(opts.get("safety", 0.99)),
            logger,
        )

    async def _audit(self, opts: dict[str, Any], logger: RunLogger) -> AuditBundle:
        setup = self._setup(opts)
        problem = setup.problem
        grid = grid_with_step(problem, self._dx(opts, setup, 1.0 / 32.0), problem.horizon / 16.0)
        samples, seed = self.config.audit_samples, self.config.seed

        def run_audits() -> AuditBundle:
            reports = [audit_A1(problem, grid, samples, seed=seed, logger=logger).to_dict()]
            if problem.barrier is None:
                return AuditBundle(problem=problem.name, reports=reports, skipped=["A2", "A3"])
            reports.append(audit_A2(problem, grid, samples, seed=seed, logger=logger).to_dict())
            reports.append(audit_A3(problem, grid, logger=logger).to_dict())
            return AuditBundle(problem=problem.name, reports=reports)

        return await asyncio.to_thread(run_audits)

    async def _comparison(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        kind = self._kind(opts, setup)
        theta = self._theta(opts, setup)
        return await comparison_probe(
            setup.problem,
            kind,
            theta,
            self._grid(opts, setup, kind, theta),
            opts.get("deltas", self.config.comparison_deltas),
            config=self._config(setup),
            sl_config=self._sl_config(opts, setup, theta),
            logger=logger,
        )

    async def _monotonicity(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        schemes = [opts["scheme"]] if "scheme" in opts else [SchemeKind.KD, SchemeKind.SL]
        thetas = [float(opts["theta"])] if "theta" in opts else [0.0, 0.5, 1.0]
        return await asyncio.to_thread(
            monotonicity_sweep,
            setup.problem,
            self._config(setup),
            schemes,
            thetas,
            self._dx(opts, setup, 1.0 / 32.0),
            None,
            logger,
        )

    async def _howard_check(self, opts: dict[str, Any], logger: RunLogger):
        return await asyncio.to_thread(
            howard_check,
            self.config,
            int(opts.get("instances", 10)),
            int(opts.get("nodes", 20)),
            int(opts.get("controls", 3)),
            logger,
        )

    async def _smoothing(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        problem = setup.problem
        grid = grid_with_step(problem, self._dx(opts, setup, 1.0 / 64.0), problem.horizon)
        return await asyncio.to_thread(
            smoothing_study,
            problem,
            grid,
            opts.get("eps", self.config.smoothing_eps),
            logger,
        )

    async def _cfl(self, opts: dict[str, Any], logger: RunLogger):
        setup = self._setup(opts)
        theta = float(opts.get("theta", 0.0))
        return await cfl_study(
            setup.problem,
            opts.get("ladder", self.config.cfl_ladder),
            theta=theta,
            sl_config=self._sl_config(opts, setup, theta),
            logger=logger,
        )
