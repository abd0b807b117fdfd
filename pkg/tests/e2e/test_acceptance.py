from __future__ import annotations

import math
import os

import pytest

from src.harness import (
    TimeStepRule,
    barrier_audit,
    boundary_layer_demo,
    cfl_study,
    comparison_probe,
    consistency_probe,
    convergence_study,
    howard_check,
    monotonicity_sweep,
    smoothing_study,
    switching_study,
)
from src.harness.rungs import grid_with_step
from src.problem.builtins import manufactured_1d, manufactured_2d
from src.schemes import SchemeKind


pytestmark = pytest.mark.acceptance


def _skip_if_not_enabled() -> None:
    if os.getenv("RUN_ACCEPTANCE_TESTS") != "1":
        pytest.skip("Set RUN_ACCEPTANCE_TESTS=1 to run the full-size acceptance ladders")


def test_boundary_layer_reproduction() -> None:
    _skip_if_not_enabled()
    report = boundary_layer_demo(dx=1 / 64, safety=0.99)

    assert report.bound_slack >= -1e-12
    assert report.lower_bound > 0.25
    assert report.interior_err <= 0.02
    assert report.passed


def test_monotonicity_under_cfl() -> None:
    _skip_if_not_enabled()
    report = monotonicity_sweep(manufactured_1d())

    assert all(case.pairs == 100 for case in report.cases)
    assert report.passed


@pytest.mark.asyncio
async def test_explicit_sl_step_scales_like_dx_three_halves() -> None:
    _skip_if_not_enabled()
    report = await cfl_study(manufactured_1d(), [1 / 32, 1 / 64, 1 / 128, 1 / 256], theta=0.0)

    assert 1.4 <= report.exponent <= 1.6
    assert report.passed


@pytest.mark.asyncio
async def test_sl_convergence_order_on_manufactured_1d() -> None:
    _skip_if_not_enabled()
    report = await convergence_study(
        manufactured_1d(),
        SchemeKind.SL,
        1.0,
        [1 / 16, 1 / 32, 1 / 64, 1 / 128, 1 / 256],
        TimeStepRule(),
    )

    assert report.fitted_order >= 0.1
    assert report.passed


@pytest.mark.asyncio
async def test_explicit_kd_convergence_order_on_manufactured_2d() -> None:
    _skip_if_not_enabled()
    report = await convergence_study(
        manufactured_2d(),
        SchemeKind.KD,
        0.0,
        [1 / 8, 1 / 16, 1 / 32, 1 / 64],
        TimeStepRule(factor=0.125, power=2.0, cfl_safety=0.9),
    )

    assert report.fitted_order >= 0.2
    assert report.passed


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
def test_consistency_model_fit(theta: float) -> None:
    _skip_if_not_enabled()
    report = consistency_probe(manufactured_1d(), SchemeKind.SL, theta, 1 / 128, [0.4, 0.2, 0.1])

    assert report.relative_residual <= 0.15
    if theta == 0.5:
        assert report.theta_term_share <= 0.01
    assert report.passed


@pytest.mark.asyncio
async def test_switching_rate() -> None:
    _skip_if_not_enabled()
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 64, 1 / 64)

    report = await switching_study(problem, SchemeKind.SL, 1.0, grid, [[0.5], [1.0]], [0.2, 0.1, 0.05, 0.025])

    assert all(rung.min_excess >= -1e-9 for rung in report.rungs)
    assert report.monotone
    assert report.order >= 1 / 3 - 0.05


@pytest.mark.asyncio
async def test_barrier_constant_is_h_uniform() -> None:
    _skip_if_not_enabled()
    report = await barrier_audit(manufactured_1d(), SchemeKind.SL, 1.0, [1 / 32, 1 / 64, 1 / 128], TimeStepRule())

    assert all(math.isfinite(rung.K) for rung in report.rungs)
    assert report.ratio <= 2.0


@pytest.mark.asyncio
async def test_discrete_comparison_with_one_rate() -> None:
    _skip_if_not_enabled()
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 32, 1 / 32)

    report = await comparison_probe(problem, SchemeKind.SL, 1.0, grid, [1e-3, 1e-2, 1e-1])

    assert all(rung.violations == 0 for rung in report.rungs)
    assert report.passed


def test_howard_against_value_iteration() -> None:
    _skip_if_not_enabled()
    report = howard_check(instances=10, nodes=20, controls=3)

    assert max(i.iterations for i in report.instances) <= 10
    assert max(i.error_vs_value_iteration for i in report.instances) <= 1e-9
    assert max(i.initialization_gap for i in report.instances) <= 1e-9


def test_initial_data_smoothing() -> None:
    _skip_if_not_enabled()
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 64, problem.horizon)

    report = smoothing_study(problem, grid, [0.1, 0.05, 0.025])

    assert report.ratio_spread <= 2.0
    assert report.passed
