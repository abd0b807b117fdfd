from __future__ import annotations

import numpy as np
import pytest

from src.errors import DomainError
from src.grid import NodeClass
from src.grid.space_time import GridFunction, build_grid, distance_to_boundary, interpolate


def _line(nodes: int = 5):
    return build_grid((0.0,), (1.0,), (nodes,), 0.1, 10)


def test_grid_classifies_nodes() -> None:
    grid = _line()

    assert grid.dx == (0.25,)
    assert grid.horizon == pytest.approx(1.0)
    assert grid.interior_indices.tolist() == [1, 2, 3]
    assert grid.boundary_indices.tolist() == [0, 4]
    assert grid.node_class(0) is NodeClass.SPATIAL_BOUNDARY
    assert grid.node_class(2) is NodeClass.INTERIOR
    assert grid.on_parabolic_boundary(0, 2)
    assert not grid.on_parabolic_boundary(3, 2)


def test_square_grid_has_single_interior_node() -> None:
    grid = build_grid((0.0, 0.0), (1.0, 1.0), (3, 3), 0.5, 2)

    assert grid.n_nodes == 9
    assert grid.interior_indices.tolist() == [4]
    assert grid.point_to_index([0.5, 0.5]) == 4
    np.testing.assert_allclose(grid.index_to_point(5), [0.5, 1.0])


def test_grid_rejects_degenerate_shapes() -> None:
    with pytest.raises(ValueError, match="at least 3 nodes"):
        build_grid((0.0,), (1.0,), (2,), 0.1, 1)
    with pytest.raises(ValueError, match="Non-positive extent"):
        build_grid((1.0,), (0.0,), (5,), 0.1, 1)
    with pytest.raises(ValueError, match="dt must be positive"):
        build_grid((0.0,), (1.0,), (5,), 0.0, 1)


def test_off_node_points_are_rejected() -> None:
    grid = _line()

    with pytest.raises(DomainError):
        grid.point_to_index([0.3])
    with pytest.raises(DomainError):
        distance_to_boundary(grid, [1.5])


def test_distance_to_boundary() -> None:
    grid = build_grid((0.0, 0.0), (1.0, 2.0), (5, 9), 0.1, 1)

    assert distance_to_boundary(grid, [0.25, 1.0]) == pytest.approx(0.25)
    assert distance_to_boundary(grid, [0.5, 1.9]) == pytest.approx(0.1)
    assert distance_to_boundary(grid, [0.0, 1.0]) == 0.0


def test_interpolation_reproduces_linear_functions() -> None:
    grid = build_grid((0.0, 0.0), (1.0, 1.0), (5, 5), 0.1, 1)
    values = 2.0 * grid.points[:, 0] - 3.0 * grid.points[:, 1] + 1.0
    f = GridFunction(grid=grid, time_level=0, values=values)

    value, support = interpolate(f, [0.3, 0.6])

    assert value == pytest.approx(2.0 * 0.3 - 3.0 * 0.6 + 1.0)
    assert sum(w for _, w in support) == pytest.approx(1.0)
    assert all(w >= 0.0 for _, w in support)


def test_interpolation_on_a_node_uses_that_node_only() -> None:
    grid = _line()
    f = GridFunction(grid=grid, time_level=0, values=np.arange(5.0))

    value, support = interpolate(f, [0.75])

    assert value == pytest.approx(3.0)
    assert support == [(3, 1.0)]


def test_grid_function_validates_values() -> None:
    grid = _line()

    with pytest.raises(ValueError, match="Expected 5 values"):
        GridFunction(grid=grid, time_level=0, values=np.zeros(4))
    with pytest.raises(ValueError, match="non-finite"):
        GridFunction(grid=grid, time_level=0, values=np.array([0.0, np.nan, 0.0, 0.0, 0.0]))

    f = GridFunction(grid=grid, time_level=2, values=np.array([0.0, 1.0, 0.0, -2.0, 0.0]))
    assert f.time == pytest.approx(0.2)
    assert f.sup_norm() == 2.0
    assert f.lipschitz_estimate() == pytest.approx(8.0)


def test_refine_keeps_the_horizon() -> None:
    grid = _line().refine(2, time_factor=4)

    assert grid.nodes_per_axis == (9,)
    assert grid.n_steps == 40
    assert grid.horizon == pytest.approx(1.0)


def test_interpolation_weights_form_a_partition_of_unity() -> None:
    grid = build_grid((0.0, 0.0), (1.0, 2.0), (9, 17), 0.1, 1)
    rng = np.random.default_rng(7)
    points = np.column_stack([rng.random(10_000), 2.0 * rng.random(10_000)])
    points[:50] = grid.points[rng.integers(0, grid.n_nodes, 50)]

    indices, weights = grid.interpolation_weights(points)

    assert weights.shape == (10_000, 4)
    assert np.all(weights >= 0.0)
    np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-14)
    assert indices.min() >= 0 and indices.max() < grid.n_nodes
    affine = 1.0 - 0.5 * grid.points[:, 0] + 3.0 * grid.points[:, 1]
    np.testing.assert_allclose(
        np.sum(weights * affine[indices], axis=1), 1.0 - 0.5 * points[:, 0] + 3.0 * points[:, 1], atol=1e-12
    )


def test_interpolation_preserves_order() -> None:
    grid = build_grid((0.0, 0.0), (1.0, 1.0), (9, 9), 0.1, 1)
    rng = np.random.default_rng(3)
    points = rng.random((2_000, 2))
    indices, weights = grid.interpolation_weights(points)

    for _ in range(20):
        lower = rng.normal(size=grid.n_nodes)
        upper = lower + rng.random(grid.n_nodes)

        below = np.sum(weights * lower[indices], axis=1)
        above = np.sum(weights * upper[indices], axis=1)

        assert np.all(below <= above)
