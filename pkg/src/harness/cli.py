from __future__ import annotations

import argparse
import asyncio
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from src.config.loader import load_harness_config
from src.config.settings import HarnessConfig
from src.errors import NumericalError
from src.harness.orchestrator import HarnessOrchestrator
from src.problem.perturbations import Perturbation
from src.schemes.models import SchemeKind
from src.ui.report_display import ReportDisplay

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2

_GLOBAL_KEYS = ("command", "config", "out", "quiet", "seed")


def parse_modes(text: str) -> list[list[float]]:
    """'0.5;1' -> [[0.5], [1.0]]; controls inside a mode are comma separated."""
    modes = []
    for chunk in text.split(";"):
        entries = [item.strip() for item in chunk.split(",") if item.strip()]
        if not entries:
            raise argparse.ArgumentTypeError(f"Empty mode in '{text}'")
        try:
            modes.append([float(item) for item in entries])
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"Modes must list numeric controls, got '{text}'") from exc
    return modes


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="harness settings (default: ./config.yml if present)")
    common.add_argument("--out", default=None, help="directory for run artifacts")
    common.add_argument("--quiet", action="store_true", help="suppress console tables")
    common.add_argument("--seed", type=int, default=None, help="seed for randomized sweeps")
    common.add_argument("--gnuplot", action="store_true", default=None, help="also write table.dat")

    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--problem", default=None, help="builtin name or JSON/YAML problem file")

    scheme = argparse.ArgumentParser(add_help=False)
    scheme.add_argument("--scheme", choices=[k.value for k in SchemeKind], default=None)
    scheme.add_argument("--theta", type=float, default=None)
    scheme.add_argument("--stencil-step", dest="stencil_step", type=float, default=None)

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--dx", type=float, default=None)
    grid.add_argument("--dt", type=float, default=None)
    grid.add_argument("--cfl-safety", dest="cfl_safety", type=float, default=None)

    ladder = argparse.ArgumentParser(add_help=False)
    ladder.add_argument("--ladder", type=float, nargs="+", default=None, help="dx values, coarse to fine")
    ladder.add_argument("--dt-factor", dest="dt_factor", type=float, default=None)
    ladder.add_argument("--dt-power", dest="dt_power", type=float, default=None)
    ladder.add_argument("--cfl-safety", dest="cfl_safety", type=float, default=None)

    parser = argparse.ArgumentParser(prog="dirichlet-hjb", description="Monotone HJB schemes and their verification")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common, problem, scheme, grid], help="single solve with sup-norm samples")
    sub.add_parser("converge", parents=[common, problem, scheme, ladder], help="convergence-order ladder")

    consistency = sub.add_parser("consistency", parents=[common, problem, scheme], help="truncation-error probe")
    consistency.add_argument("--dx", type=float, default=None)
    consistency.add_argument("--eps", type=float, nargs="+", default=None)
    consistency.add_argument("--family", choices=["kink", "smooth"], default=None)

    sub.add_parser("barrier-audit", parents=[common, problem, scheme, ladder], help="barrier constant per rung")

    switching = sub.add_parser("switching", parents=[common, problem, scheme, grid], help="switching-system rate")
    switching.add_argument("--modes", type=parse_modes, default=None, help="e.g. '0.5;1'")
    switching.add_argument("--k", type=float, nargs="+", default=None, help="decreasing switching costs")

    dependence = sub.add_parser("dependence", parents=[common, problem, scheme, grid], help="coefficient perturbations")
    dependence.add_argument("--deltas", type=float, nargs="+", default=None)
    dependence.add_argument("--kinds", nargs="+", choices=[k.value for k in Perturbation], default=None)

    layer = sub.add_parser("boundary-layer", parents=[common], help="explicit scheme that fails near x = 0")
    layer.add_argument("--dx", type=float, default=None)
    layer.add_argument("--safety", type=float, default=None)

    audit = sub.add_parser("audit", parents=[common, problem], help="sampled checks of A1-A3")
    audit.add_argument("--dx", type=float, default=None)

    comparison = sub.add_parser("comparison", parents=[common, problem, scheme, grid], help="discrete comparison")
    comparison.add_argument("--deltas", type=float, nargs="+", default=None)

    monotonicity = sub.add_parser("monotonicity", parents=[common, problem], help="random ordered pairs")
    monotonicity.add_argument("--scheme", choices=[k.value for k in SchemeKind], default=None)
    monotonicity.add_argument("--theta", type=float, default=None)
    monotonicity.add_argument("--dx", type=float, default=None)

    howard = sub.add_parser("howard-check", parents=[common], help="Howard against value iteration")
    howard.add_argument("--instances", type=int, default=None)
    howard.add_argument("--nodes", type=int, default=None)
    howard.add_argument("--controls", type=int, default=None)

    smoothing = sub.add_parser("smoothing", parents=[common, problem], help="initial-data smoothing ladder")
    smoothing.add_argument("--dx", type=float, default=None)
    smoothing.add_argument("--eps", type=float, nargs="+", default=None)

    cfl = sub.add_parser("cfl", parents=[common, problem], help="explicit step bound of the SL scheme")
    cfl.add_argument("--theta", type=float, default=None)
    cfl.add_argument("--ladder", type=float, nargs="+", default=None)
    cfl.add_argument("--stencil-step", dest="stencil_step", type=float, default=None)
    return parser


def _load_config(path: Optional[str]) -> HarnessConfig:
    if path is None:
        return load_harness_config("config.yml") if Path("config.yml").exists() else HarnessConfig()
    return load_harness_config(path)


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_BAD_INPUT

    display = ReportDisplay()
    try:
        config = _load_config(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        orchestrator = HarnessOrchestrator(config=config, out=args.out, quiet=args.quiet, display=display)
        options = {key: value for key, value in vars(args).items() if key not in _GLOBAL_KEYS}
        report = asyncio.run(orchestrator.run(args.command, options))
    except NumericalError as exc:
        display.error(f"numerical failure: {exc}")
        return EXIT_FAILED
    except (ValueError, FileNotFoundError) as exc:
        display.error(f"bad input: {exc}")
        return EXIT_BAD_INPUT
    return EXIT_OK if report["passed"] else EXIT_FAILED


def entrypoint() -> None:
    sys.exit(cli_main(sys.argv[1:]))
