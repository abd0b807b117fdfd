from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import SchemeAssemblyError
from src.grid.space_time import build_grid
from src.harness.fitting import fit_order
from src.problem.builtins import boundary_layer, manufactured_1d
from src.problem.models import ControlProblem
from src.schemes import (
    KushnerDupuisScheme,
    SchemeKind,
    SLConfig,
    assemble_kd,
    assemble_sl,
    build_scheme,
    cfl_bound,
    check_positive_type,
    consistency_error_model,
    explicit_step_bound,
    recommended_time_step,
)


def _constant_diffusion(a: np.ndarray, drift: tuple[float, ...] = (0.0, 0.0)) -> ControlProblem:
    sigma = np.sqrt(2.0) * np.linalg.cholesky(a)
    dim = a.shape[0]
    return ControlProblem(
        name="constant",
        lower=(0.0,) * dim,
        upper=(1.0,) * dim,
        horizon=1.0,
        controls=(0,),
        sigma=lambda alpha, t, x: np.broadcast_to(sigma, (x.shape[0], dim, dim)),
        drift=lambda alpha, t, x: np.broadcast_to(np.asarray(drift[:dim]), (x.shape[0], dim)),
        discount=lambda alpha, t, x: np.zeros(x.shape[0]),
        running_cost=lambda alpha, t, x: np.zeros(x.shape[0]),
        psi0=lambda x: np.zeros(x.shape[0]),
        psi1=lambda t, x: np.zeros(x.shape[0]),
        time_homogeneous=True,
    )


def _square(nodes: int = 5):
    return build_grid((0.0, 0.0), (1.0, 1.0), (nodes, nodes), 0.01, 1)


def test_kd_laplacian_row() -> None:
    grid = _square()
    h2 = 0.25**2

    row = assemble_kd(_constant_diffusion(np.eye(2)), grid, 0.0, 0, 12)

    assert row.center_weight == pytest.approx(4.0 / h2)
    assert dict(row.node_entries) == pytest.approx({7: 1 / h2, 11: 1 / h2, 13: 1 / h2, 17: 1 / h2})


def test_kd_cross_term_uses_the_sign_selected_corners() -> None:
    grid = _square()
    h2 = 0.25**2

    row = assemble_kd(_constant_diffusion(np.array([[1.0, 0.4], [0.4, 1.0]])), grid, 0.0, 0, 12)
    weights = dict(row.node_entries)

    assert weights[18] == pytest.approx(0.4 / h2)
    assert weights[6] == pytest.approx(0.4 / h2)
    assert 8 not in weights and 16 not in weights
    assert weights[13] == pytest.approx(0.6 / h2)
    assert min(weights.values()) >= 0.0


def test_kd_rows_reproduce_the_operator_on_quadratics() -> None:
    a = np.array([[1.0, -0.3], [-0.3, 0.8]])
    problem = _constant_diffusion(a)
    grid = _square(9)
    scheme = KushnerDupuisScheme(problem, grid)
    hessian = np.array([[2.0, 1.0], [1.0, -4.0]])
    x = grid.points
    phi = x[:, 0] ** 2 + x[:, 0] * x[:, 1] - 2.0 * x[:, 1] ** 2 + 3.0 * x[:, 0]

    values = scheme.operator(0.0, 0).apply(phi)

    np.testing.assert_allclose(values, -np.trace(a @ hessian), atol=1e-10)


def test_kd_flags_a_dominance_failure() -> None:
    grid = _square()
    scheme = KushnerDupuisScheme(_constant_diffusion(np.array([[1.0, 1.2], [1.2, 2.0]])), grid)

    report = check_positive_type(scheme.operators(0.0), grid.dt, theta=1.0)

    assert not report.passed
    assert report.violation["reason"] == "negative off-center weight"


def test_kd_upwinds_the_drift() -> None:
    grid = build_grid((0.0,), (1.0,), (5,), 0.01, 1)
    problem = _constant_diffusion(np.eye(1), drift=(2.0,))

    row = assemble_kd(problem, grid, 0.0, 0, 2)
    weights = dict(row.node_entries)

    assert weights[3] == pytest.approx(16.0 + 8.0)
    assert weights[1] == pytest.approx(16.0)


def test_sl_legs_on_nodes_are_exact_for_quadratics() -> None:
    problem = manufactured_1d()
    grid = build_grid((0.0,), (1.0,), (17,), 1 / 16, 16)
    cfg = SLConfig(stencil_step=1 / 32)
    phi = grid.points[:, 0] ** 2

    row = assemble_sl(problem, grid, 0.0, 1.0, 8, cfg)

    assert sorted(idx for idx, _ in row.node_entries) == [4, 12]
    assert row.apply(phi, lambda pts: pts[:, 0] ** 2) == pytest.approx(-2.0 - row.constant, abs=1e-10)


def test_sl_truncates_legs_at_the_boundary() -> None:
    problem = manufactured_1d()
    grid = build_grid((0.0,), (1.0,), (17,), 1 / 16, 16)
    cfg = SLConfig(stencil_step=1 / 32)
    phi = grid.points[:, 0] ** 2

    row = assemble_sl(problem, grid, 0.0, 1.0, 1, cfg)

    assert len(row.boundary_entries) == 1
    assert row.boundary_entries[0][0][0] == pytest.approx(0.0, abs=1e-15)
    assert all(w > 0.0 for _, w in row.node_entries + row.boundary_entries)
    assert row.apply(phi, lambda pts: pts[:, 0] ** 2) == pytest.approx(-2.0 - row.constant, abs=1e-10)


def test_sl_row_without_diffusion_or_drift_is_zero_order() -> None:
    still = ControlProblem(
        name="still",
        lower=(0.0,),
        upper=(1.0,),
        horizon=1.0,
        controls=(0,),
        sigma=lambda alpha, t, x: np.zeros((x.shape[0], 1, 1)),
        drift=lambda alpha, t, x: np.zeros((x.shape[0], 1)),
        discount=lambda alpha, t, x: np.full(x.shape[0], 0.5),
        running_cost=lambda alpha, t, x: np.ones(x.shape[0]),
        psi0=lambda x: np.zeros(x.shape[0]),
        psi1=lambda t, x: np.zeros(x.shape[0]),
    )
    grid = build_grid((0.0,), (1.0,), (9,), 0.1, 1)

    row = assemble_sl(still, grid, 0.0, 0, 4)

    assert row.node_entries == ()
    assert row.center_weight == pytest.approx(-0.5)
    assert row.constant == pytest.approx(1.0)


def test_assembly_rejects_boundary_nodes_and_unknown_controls() -> None:
    problem = manufactured_1d()
    grid = build_grid((0.0,), (1.0,), (9,), 0.1, 1)

    with pytest.raises(SchemeAssemblyError, match="not interior"):
        assemble_kd(problem, grid, 0.0, 1.0, 0)
    with pytest.raises(SchemeAssemblyError, match="Unknown control"):
        assemble_sl(problem, grid, 0.0, 2.0, 4)


def test_explicit_heat_stencil_bound() -> None:
    grid = build_grid((0.0,), (1.0,), (9,), 0.01, 1)
    scheme = KushnerDupuisScheme(_constant_diffusion(np.eye(1)), grid)
    dx2 = grid.dx_min**2
    ops = scheme.operators(0.0)

    assert check_positive_type(ops, 0.45 * dx2, theta=0.0).passed
    failed = check_positive_type(ops, dx2, theta=0.0)
    assert not failed.passed
    assert failed.violation["reason"] == "negative explicit coefficient"
    assert check_positive_type(ops, 10.0, theta=1.0).passed
    assert explicit_step_bound(scheme, 0.0) == pytest.approx(dx2 / 2)
    assert math.isinf(explicit_step_bound(scheme, 1.0))


def test_boundary_layer_rows_are_positive_below_the_stability_bound() -> None:
    dx = 1 / 64
    grid = build_grid((0.0,), (1.0,), (65,), 0.99 * 16 * dx**2, 10)
    scheme = build_scheme(SchemeKind.KD, boundary_layer(), grid)

    assert check_positive_type(scheme.operators(0.0), grid.dt, theta=0.0).passed


def test_sl_cfl_bound_scales_with_the_stencil() -> None:
    problem = manufactured_1d()
    coarse = build_grid((0.0,), (1.0,), (33,), 1 / 32, 32)
    fine = build_grid((0.0,), (1.0,), (65,), 1 / 64, 64)
    cfg = SLConfig(theta=0.0)

    bound_coarse = cfl_bound(problem, coarse, cfg)
    bound_fine = cfl_bound(problem, fine, cfg)
    scheme = build_scheme(SchemeKind.SL, problem, fine, cfg)

    assert 0.0 < bound_fine < bound_coarse
    assert check_positive_type(scheme.operators(0.0), bound_fine, theta=0.0).passed
    assert not check_positive_type(scheme.operators(0.0), 1.01 * bound_fine, theta=0.0).passed
    assert math.isinf(cfl_bound(problem, fine, SLConfig(theta=1.0)))


def test_recommended_time_step_applies_the_cfl_constant() -> None:
    problem = manufactured_1d()
    grid = build_grid((0.0,), (1.0,), (65,), 1 / 64, 64)
    bound = cfl_bound(problem, grid, SLConfig(theta=0.0))

    assert bound == pytest.approx(grid.dx_min**1.5 / math.sqrt(2.0), rel=1e-9)
    assert recommended_time_step(problem, grid, SLConfig(theta=0.0)) == bound
    assert recommended_time_step(problem, grid, SLConfig(theta=0.0, cfl_constant=0.5)) == pytest.approx(
        0.5 * grid.dx_min**1.5
    )


def test_consistency_error_model_terms() -> None:
    assert consistency_error_model(0.01, 0.01, 0.1, 0.5, 1.0, 1.0) == pytest.approx(20.0)
    assert consistency_error_model(0.01, 0.01, 0.1, 1.0, 2.0, 1.0) == pytest.approx(60.0)
    with pytest.raises(ValueError, match="positive"):
        consistency_error_model(0.0, 0.01, 0.1, 1.0, 1.0, 1.0)


@pytest.mark.parametrize("a12", [0.3, -0.3])
def test_kd_truncation_is_second_order_on_quartics(a12: float) -> None:
    a = np.array([[1.0, a12], [a12, 0.8]])
    problem = _constant_diffusion(a)
    steps, errors = [], []
    for nodes in (5, 9, 17, 33):
        grid = _square(nodes)
        x, y = grid.points[:, 0], grid.points[:, 1]
        phi = x**4 + y**4 + x**2 * y**2
        op = KushnerDupuisScheme(problem, grid).operator(0.0, 0)
        position = int(np.flatnonzero(op.rows == grid.point_to_index([0.5, 0.5]))[0])
        exact = -(a[0, 0] * (12 * 0.25 + 2 * 0.25) + 2 * a12 * 4 * 0.25 + a[1, 1] * (12 * 0.25 + 2 * 0.25))

        steps.append(grid.dx_min)
        errors.append(abs(op.apply(phi)[position] - exact))

    assert min(errors) > 0.0
    assert fit_order(steps, errors, tail=len(steps)) >= 1.9


def test_sl_truncation_orders_inside_and_near_the_boundary() -> None:
    problem = _constant_diffusion(np.eye(1))
    steps, inside, near_boundary = [], [], []
    for nodes in (65, 129, 257, 513):
        grid = build_grid((0.0,), (1.0,), (nodes,), 0.01, 1)
        scheme = build_scheme(SchemeKind.SL, problem, grid)
        op = scheme.operator(0.0, 0)
        phi = np.sin(np.pi * grid.points[:, 0])
        boundary = np.sin(np.pi * op.boundary_points[:, 0])
        exact = np.pi**2 * phi[op.rows]
        error = np.abs(op.apply(phi, boundary) - exact)
        near = scheme.near_boundary(0.0)

        steps.append(grid.dx_min)
        inside.append(float(error[~near].max()))
        near_boundary.append(float(error[near].max()))

    assert fit_order(steps, inside, tail=len(steps)) >= 0.9
    assert fit_order(steps, near_boundary, tail=len(steps)) >= 0.4
    assert all(b > i for b, i in zip(near_boundary, inside))


def test_cfl_bound_scales_like_dx_three_halves() -> None:
    problem = manufactured_1d()
    steps = [1 / 32, 1 / 64, 1 / 128]
    explicit, half = [], []
    for dx in steps:
        grid = build_grid((0.0,), (1.0,), (round(1 / dx) + 1,), dx, 1)
        explicit.append(cfl_bound(problem, grid, SLConfig(theta=0.0)))
        half.append(cfl_bound(problem, grid, SLConfig(theta=0.5)))

    assert 1.4 <= fit_order(steps, explicit) <= 1.6
    assert half == pytest.approx([2.0 * bound for bound in explicit], rel=1e-12)
