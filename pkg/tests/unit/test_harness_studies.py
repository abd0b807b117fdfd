from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from src.config.settings import HarnessConfig
from src.errors import ConfigError, MissingBarrierError
from src.harness import (
    TimeStepRule,
    barrier_audit,
    boundary_layer_demo,
    cfl_study,
    comparison_probe,
    consistency_probe,
    continuous_dependence_probe,
    convergence_study,
    fit_order,
    howard_check,
    monotonicity_sweep,
    optimal_refinement,
    smoothing_study,
    switching_study,
    theoretical_exponents,
)
from src.harness.rungs import grid_with_step
from src.problem.builtins import boundary_layer, manufactured_1d


def test_fit_order_recovers_a_power_law() -> None:
    steps = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    errors = [3.0 * h**1.5 for h in steps]

    assert fit_order(steps, errors) == pytest.approx(1.5)
    with pytest.raises(ValueError, match="two points"):
        fit_order([0.1], [0.2])


def test_theoretical_exponents_and_refinement() -> None:
    assert theoretical_exponents("kd", 0.0)["lower"] == (pytest.approx(0.1), pytest.approx(0.2))
    assert theoretical_exponents("sl", 0.5)["lower"] == (pytest.approx(1 / 8), pytest.approx(1 / 10))
    assert theoretical_exponents("sl", 1.0)["upper"] == (pytest.approx(1 / 4), pytest.approx(1 / 4))

    half = optimal_refinement(0.5)
    assert half["p_upper"] == pytest.approx(0.75)
    assert half["p_lower"] == pytest.approx(0.8)
    assert not half["cfl_compatible"]
    assert optimal_refinement(1.0)["cfl_compatible"]
    with pytest.raises(ValueError):
        optimal_refinement(1.5)


def test_time_step_rule_and_grid_step() -> None:
    problem = manufactured_1d()

    grid = grid_with_step(problem, 1 / 16, 0.3)

    assert grid.dt <= 0.3
    assert grid.n_steps * grid.dt == pytest.approx(problem.horizon)
    assert grid.nodes_per_axis == (17,)
    assert TimeStepRule(factor=2.0, power=2.0).nominal(0.1) == pytest.approx(0.02)
    with pytest.raises(ValueError, match="cfl_safety"):
        TimeStepRule(cfl_safety=0.0)


def test_boundary_layer_demo_stays_above_the_partial_sum() -> None:
    report = boundary_layer_demo()

    assert report.passed
    assert report.bound_slack >= -1e-12
    assert report.u1_final >= report.lower_bound - 1e-12
    assert report.lower_bound > 0.25
    assert abs(report.lower_bound - report.limit) <= 0.02
    assert report.gap > 0.1
    assert report.monotonicity_slack >= 0.0
    assert report.history[0][0] == 0.0


@pytest.mark.parametrize("kwargs, message", [({"safety": 0.0}, "safety"), ({"dx": 0.3}, "divide"), ({"dx": 0.6}, "dx")])
def test_boundary_layer_demo_rejects_bad_input(kwargs: dict, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        boundary_layer_demo(**kwargs)


def test_howard_check_agrees_with_value_iteration() -> None:
    report = howard_check(instances=3, nodes=10, controls=3)

    assert report.passed
    assert len(report.instances) == 3
    for instance in report.instances:
        assert instance.iterations <= 10
        assert instance.error_vs_value_iteration <= 1e-9


def test_monotonicity_sweep_finds_no_violations() -> None:
    config = replace(HarnessConfig(), property_pairs=3)

    report = monotonicity_sweep(manufactured_1d(), config, dx=1 / 16)

    assert report.passed
    assert len(report.cases) == 6
    assert all(case.min_gap >= 0.0 for case in report.cases)


def test_monotonicity_sweep_needs_pairs() -> None:
    with pytest.raises(ConfigError, match="property_pairs"):
        monotonicity_sweep(manufactured_1d(), replace(HarnessConfig(), property_pairs=0))


def test_smoothing_study_ratio_is_stable() -> None:
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 64, 0.5)

    report = smoothing_study(problem, grid, [0.1, 0.05, 0.025])

    assert report.passed
    assert report.ratio_spread <= 2.0
    with pytest.raises(ConfigError):
        smoothing_study(problem, grid, [])


def test_smooth_consistency_probe_does_not_depend_on_eps() -> None:
    report = consistency_probe(manufactured_1d(), "kd", 1.0, 1 / 16, [0.4, 0.2, 0.125], family="smooth")

    assert report.passed
    assert len(report.truncation) == 3
    assert report.truncation[0] == pytest.approx(report.truncation[-1], abs=1e-12)


def test_consistency_probe_rejects_small_eps() -> None:
    with pytest.raises(ConfigError, match="too small"):
        consistency_probe(manufactured_1d(), "kd", 1.0, 1 / 16, [0.05])
    with pytest.raises(ConfigError, match="Unknown test family"):
        consistency_probe(manufactured_1d(), "kd", 1.0, 1 / 16, [0.4], family="wavy")


@pytest.mark.asyncio
async def test_cfl_study_follows_the_three_halves_power() -> None:
    report = await cfl_study(manufactured_1d(), [1 / 16, 1 / 32, 1 / 64])

    assert report.passed
    assert report.exponent == pytest.approx(1.5, abs=0.05)
    assert all(rung.all_positive for rung in report.rungs)


@pytest.mark.asyncio
async def test_cfl_study_needs_two_spacings() -> None:
    with pytest.raises(ConfigError, match="two grid spacings"):
        await cfl_study(manufactured_1d(), [1 / 32])


@pytest.mark.asyncio
async def test_implicit_kd_convergence_ladder() -> None:
    report = await convergence_study(manufactured_1d(), "kd", 1.0, [1 / 8, 1 / 16, 1 / 32], TimeStepRule())

    errors = [rung.err_global for rung in report.rungs]
    assert report.reference == "exact"
    assert errors[-1] < errors[0]
    assert report.fitted_order > 0.5
    assert report.refinement_power == pytest.approx(1.0)
    assert report.rungs[0].order is None
    headers, rows = report.table()
    assert headers == ["dx", "dt", "err_global", "err_interior", "order"]
    assert len(rows) == 3


@pytest.mark.asyncio
async def test_convergence_ladder_must_refine() -> None:
    with pytest.raises(ConfigError, match="strictly refining"):
        await convergence_study(manufactured_1d(), "kd", 1.0, [1 / 16, 1 / 8], TimeStepRule())


@pytest.mark.asyncio
async def test_cost_shifts_are_ordered_and_bounded() -> None:
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 8, 1 / 8)

    report = await comparison_probe(problem, "kd", 1.0, grid, [0.01, 0.1])

    assert report.passed
    assert report.mu == pytest.approx(0.0, abs=1e-9)
    assert all(rung.ordered and rung.violations == 0 for rung in report.rungs)
    assert not math.isnan(report.rungs[0].max_excess)
    assert np.isfinite(report.mu_spread)


@pytest.mark.asyncio
async def test_cost_perturbation_scales_linearly() -> None:
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 8, 1 / 8)

    report = await continuous_dependence_probe(problem, "kd", 1.0, grid, [0.1, 0.05], kinds=["cost"])

    assert report.passed
    [series] = report.series
    assert series.kind == "cost"
    assert series.exponent == pytest.approx(1.0, abs=1e-6)
    assert series.differences[0] == pytest.approx(2.0 * series.differences[1])


@pytest.mark.asyncio
async def test_barrier_audit_needs_a_barrier() -> None:
    with pytest.raises(MissingBarrierError):
        await barrier_audit(boundary_layer(), "kd", 1.0, [1 / 16, 1 / 32], TimeStepRule())


@pytest.mark.asyncio
async def test_switching_study_needs_decreasing_costs() -> None:
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 8, 1 / 8)

    with pytest.raises(ConfigError, match="strictly decreasing"):
        await switching_study(problem, "kd", 1.0, grid, [[0.5], [1.0]], [0.1, 0.2])


@pytest.mark.asyncio
async def test_diffusion_perturbation_meets_the_square_root_rate() -> None:
    problem = manufactured_1d()
    grid = grid_with_step(problem, 1 / 16, 1 / 16)

    report = await continuous_dependence_probe(problem, "kd", 1.0, grid, [0.1, 0.05, 0.025], kinds=["sigma"])

    [series] = report.series
    assert series.kind == "sigma"
    assert all(d > 0.0 for d in series.differences)
    assert series.threshold == 0.45
    assert series.exponent >= 0.45
    assert report.passed
