from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from src.errors import ConfigError, MissingBarrierError
from src.grid.space_time import build_grid
from src.problem import (
    Perturbation,
    audit_A1,
    audit_A2,
    audit_A3,
    bisect_barrier_parameter,
    builtin_problem,
    perturb_problem,
    smooth_initial_data,
)
from src.problem.builtins import boundary_layer, degenerate_drift, manufactured_1d, manufactured_2d, parabola_barrier
from src.problem.models import ControlProblem, FunctionJet
from src.problem.mollifier import bump_mass, mollified_kink


def _random_points(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return 0.01 + 0.98 * rng.random((n, dim))


@pytest.mark.parametrize("factory, dim", [(manufactured_1d, 1), (manufactured_2d, 2)])
def test_manufactured_solutions_solve_the_equation(factory, dim: int) -> None:
    problem = factory()
    rng = np.random.default_rng(0)
    for t in rng.uniform(0.0, problem.horizon, 10):
        x = _random_points(rng, 100, dim)
        jet = problem.exact_jet(float(t), x)

        residual = problem.hamiltonian_residual(float(t), x, jet)

        np.testing.assert_allclose(residual, 0.0, atol=1e-10)


def test_manufactured_1d_picks_the_larger_diffusion() -> None:
    problem = manufactured_1d()
    x = np.array([[0.3], [0.7]])
    jet = problem.exact_jet(0.2, x)

    weak = problem.operator(0.5, 0.2, x, jet)
    strong = problem.operator(1.0, 0.2, x, jet)

    assert np.all(strong > weak)


def test_boundary_layer_interior_limit_solves_the_equation() -> None:
    problem = boundary_layer()
    x = np.linspace(0.1, 0.9, 9).reshape(-1, 1)
    t = 0.7
    u = np.full(9, np.exp(-t))
    jet = FunctionJet(value=u, gradient=np.zeros((9, 1)), hessian=np.zeros((9, 1, 1)), time_derivative=-u)

    residual = problem.hamiltonian_residual(t, x, jet)

    np.testing.assert_allclose(residual, 0.0, atol=1e-15)
    assert problem.barrier is None


def test_builtin_problem_rejects_unknown_names() -> None:
    with pytest.raises(ConfigError, match="manufactured-1d"):
        builtin_problem("heat")


def test_coefficient_shapes_are_normalized() -> None:
    problem = ControlProblem(
        name="scalar",
        lower=(0.0,),
        upper=(1.0,),
        horizon=1.0,
        controls=(0,),
        sigma=lambda alpha, t, x: 1.0,
        drift=lambda alpha, t, x: 0.5,
        discount=lambda alpha, t, x: 0.0,
        running_cost=lambda alpha, t, x: 2.0,
        psi0=lambda x: 0.0,
        psi1=lambda t, x: 0.0,
    )
    x = np.linspace(0.0, 1.0, 4).reshape(-1, 1)

    assert problem.sigma_at(0, 0.0, x).shape == (4, 1, 1)
    np.testing.assert_allclose(problem.diffusion(0, 0.0, x)[:, 0, 0], 0.5)
    np.testing.assert_allclose(problem.drift_at(0, 0.0, x), 0.5)
    np.testing.assert_allclose(problem.cost_at(0, 0.0, x), 2.0)


def test_problem_requires_controls() -> None:
    with pytest.raises(ConfigError, match="nonempty control set"):
        ControlProblem(
            name="empty",
            lower=(0.0,),
            upper=(1.0,),
            horizon=1.0,
            controls=(),
            sigma=lambda alpha, t, x: 0.0,
            drift=lambda alpha, t, x: 0.0,
            discount=lambda alpha, t, x: 0.0,
            running_cost=lambda alpha, t, x: 0.0,
            psi0=lambda x: 0.0,
            psi1=lambda t, x: 0.0,
        )


def test_parabola_barrier_derivatives_match_finite_differences() -> None:
    x = np.array([[0.25, 0.75], [0.4, 0.1]])
    jet = parabola_barrier(x, scale=2.0, rate=1.5, t=0.3, lower=(0.0, 0.0), upper=(1.0, 2.0))
    h = 1e-5

    def value(points: np.ndarray) -> np.ndarray:
        return parabola_barrier(points, 2.0, 1.5, 0.3, (0.0, 0.0), (1.0, 2.0)).value

    for i in range(2):
        e_i = np.zeros(2)
        e_i[i] = h
        np.testing.assert_allclose(jet.gradient[:, i], (value(x + e_i) - value(x - e_i)) / (2 * h), rtol=1e-6)
        for j in range(2):
            e_j = np.zeros(2)
            e_j[j] = h
            mixed = (value(x + e_i + e_j) - value(x + e_i - e_j) - value(x - e_i + e_j) + value(x - e_i - e_j)) / (
                4 * h * h
            )
            np.testing.assert_allclose(jet.hessian[:, i, j], mixed, atol=1e-4)
    np.testing.assert_allclose(jet.time_derivative, 1.5 * jet.value)


def test_parabola_barrier_vanishes_on_the_boundary() -> None:
    x = np.array([[0.0, 0.3], [1.0, 0.3], [0.5, 0.0], [0.5, 1.0]])

    np.testing.assert_allclose(parabola_barrier(x).value, 0.0)


def test_perturbations_shift_one_coefficient() -> None:
    problem = manufactured_1d()
    x = np.array([[0.25], [0.5]])

    shifted = perturb_problem(problem, Perturbation.COST, 0.1)
    drifted = perturb_problem(problem, "drift", -0.2)

    np.testing.assert_allclose(shifted.cost_at(1.0, 0.0, x), problem.cost_at(1.0, 0.0, x) + 0.1)
    np.testing.assert_allclose(drifted.drift_at(0.5, 0.0, x), -0.2)
    np.testing.assert_allclose(shifted.boundary_values(0.4, x), problem.boundary_values(0.4, x))
    assert shifted.exact_solution is None
    assert shifted.barrier is None
    assert perturb_problem(problem, Perturbation.SIGMA, 0.0) is problem


def test_perturbation_rejects_nonfinite_delta() -> None:
    with pytest.raises(ConfigError):
        perturb_problem(manufactured_1d(), Perturbation.DISCOUNT, float("inf"))


def test_audits_on_manufactured_1d() -> None:
    problem = manufactured_1d()
    grid = build_grid((0.0,), (1.0,), (17,), 0.125, 8)

    a1 = audit_A1(problem, grid, samples=200, seed=1)
    a2 = audit_A2(problem, grid, samples=200, seed=1)
    a3 = audit_A3(problem, grid)

    assert a1.passed
    assert a1.details["min_diffusion_eigenvalue"] == pytest.approx(0.5)
    assert a2.passed
    assert a2.sampled_max == pytest.approx(-1.0, abs=1e-8)
    assert a3.passed
    assert a3.sampled_max == pytest.approx(4.0)


def test_outward_drift_barrier_passes_audit_A2() -> None:
    problem = degenerate_drift()
    grid = build_grid((0.0,), (1.0,), (17,), 0.125, 8)

    report = audit_A2(problem, grid, samples=200)

    assert report.passed
    assert report.sampled_max <= -1.0


def test_audits_need_a_barrier() -> None:
    grid = build_grid((0.0,), (1.0,), (17,), 0.125, 16)

    with pytest.raises(MissingBarrierError):
        audit_A2(boundary_layer(), grid, samples=10)
    with pytest.raises(MissingBarrierError):
        smooth_initial_data(boundary_layer(), grid, 0.1)


def test_mollified_kink_is_exact_away_from_the_kink() -> None:
    x = np.array([0.0, 0.1, 0.9, 1.0])

    value, first, second = mollified_kink(x, center=0.5, eps=0.2)

    np.testing.assert_allclose(value, np.abs(x - 0.5), atol=1e-12)
    np.testing.assert_allclose(first, np.sign(x - 0.5))
    np.testing.assert_allclose(second, 0.0)
    assert bump_mass() > 0.0


def test_smoothing_matches_boundary_data_and_stays_close() -> None:
    problem = manufactured_1d()
    grid = build_grid((0.0,), (1.0,), (33,), 0.125, 8)

    psi_eps, report = smooth_initial_data(problem, grid, 0.05)

    assert report.passed
    assert report.boundary_max <= 1e-12
    assert report.sup_error <= report.error_bound
    np.testing.assert_allclose(psi_eps(np.array([[0.0], [1.0]])), 0.0, atol=1e-12)


def test_barrier_rate_threshold_is_found_by_bisection() -> None:
    grid = build_grid((0.0,), (1.0,), (17,), 0.125, 8)

    rate = bisect_barrier_parameter(lambda r: degenerate_drift(barrier_rate=r), grid, 0.5, 3.0, samples=64)

    assert rate == pytest.approx(2.0, abs=2e-3)


def test_with_controls_restricts_the_control_set() -> None:
    problem = manufactured_1d()

    assert problem.with_controls([1.0]).controls == (1.0,)
    with pytest.raises(ConfigError, match="not part of problem"):
        problem.with_controls([2.0])


def _unit_interval_problem(sigma, running_cost) -> ControlProblem:
    return ControlProblem(
        name="unit",
        lower=(0.0,),
        upper=(1.0,),
        horizon=1.0,
        controls=(0,),
        sigma=sigma,
        drift=lambda alpha, t, x: 0.0,
        discount=lambda alpha, t, x: 0.0,
        running_cost=running_cost,
        psi0=lambda x: 0.0,
        psi1=lambda t, x: 0.0,
        time_homogeneous=True,
    )


def test_audit_A1_measures_a_linear_cost_exactly() -> None:
    problem = _unit_interval_problem(lambda alpha, t, x: 1.0, lambda alpha, t, x: x[:, 0])
    grid = build_grid((0.0,), (1.0,), (17,), 0.125, 8)

    report = audit_A1(problem, grid, samples=500, seed=2)

    assert report.passed
    assert report.details["running_cost"]["0"]["seminorm"] == pytest.approx(1.0, abs=1e-10)
    assert report.details["sigma"]["0"]["seminorm"] == 0.0
    assert report.flags == []


def test_audit_A1_flags_a_square_root_diffusion() -> None:
    problem = _unit_interval_problem(lambda alpha, t, x: np.sqrt(x[:, 0]), lambda alpha, t, x: 0.0)
    grid = build_grid((0.0,), (1.0,), (17,), 0.125, 8)

    report = audit_A1(problem, grid, samples=200)

    assert report.details["sigma"]["0"]["growth"] == pytest.approx(np.sqrt(2.0), rel=1e-6)
    assert any(flag.startswith("sigma[0] suspected non-Lipschitz") for flag in report.flags)


@pytest.mark.parametrize("scale, passed", [(0.1, False), (1.0, True), (2.0, True)])
def test_audit_A2_scales_with_the_barrier(scale: float, passed: bool) -> None:
    problem = replace(manufactured_1d(), barrier=lambda t, x: parabola_barrier(x, scale=scale))
    grid = build_grid((0.0,), (1.0,), (17,), 0.125, 8)

    report = audit_A2(problem, grid, samples=200, seed=1)

    assert report.sampled_max == pytest.approx(-scale, rel=1e-9)
    assert report.passed is passed
