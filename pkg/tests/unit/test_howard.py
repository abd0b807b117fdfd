from __future__ import annotations

import numpy as np
import pytest
from scipy import sparse

from src.errors import PolicyIterationError, SingularSystemError
from src.harness.properties import random_policy_system
from src.problem.builtins import manufactured_1d
from src.schemes import SchemeKind, build_scheme
from src.solver import HJBSolver, PolicySystem, SolverConfig, howard_solve, value_iteration


def _scalar_system(*pieces: tuple[float, float]) -> PolicySystem:
    return PolicySystem(
        matrices=[sparse.csr_matrix([[a]]) for a, _ in pieces],
        rhs=[np.array([f]) for _, f in pieces],
    )


def test_howard_single_control_is_one_linear_solve() -> None:
    result = howard_solve(_scalar_system((2.0, 4.0)), SolverConfig())

    assert result.values == pytest.approx([2.0])
    assert result.iterations == 2
    assert result.linear_solves == 1
    assert result.policy_changes == 0


def test_howard_picks_the_maximizing_control() -> None:
    system = _scalar_system((1.0, 1.0), (1.0, 3.0))

    result = howard_solve(system, SolverConfig())
    reference, _ = value_iteration(system)

    assert result.values == pytest.approx([1.0])
    assert result.policy.tolist() == [0]
    assert reference == pytest.approx([1.0])


def test_howard_matches_value_iteration_on_random_systems() -> None:
    rng = np.random.default_rng(11)
    cfg = SolverConfig(policy_tol=1e-11)
    for _ in range(5):
        system = random_policy_system(rng, nodes=15, controls=3)

        high = howard_solve(system, cfg, initial=np.full(15, 10.0))
        low = howard_solve(system, cfg, initial=np.full(15, -10.0))
        reference, _ = value_iteration(system)

        np.testing.assert_allclose(high.values, reference, atol=1e-9)
        np.testing.assert_allclose(low.values, high.values, atol=1e-9)
        assert high.monotone and low.monotone
        assert high.iterations <= 10
        assert np.max(np.abs(system.residuals(high.values).max(axis=0))) <= 1e-10


def test_howard_respects_the_iteration_cap() -> None:
    rng = np.random.default_rng(3)
    system = random_policy_system(rng, nodes=30, controls=4)

    with pytest.raises(PolicyIterationError, match="did not converge"):
        howard_solve(system, SolverConfig(policy_max_iters=1), initial=np.full(30, 10.0))


def test_singular_frozen_system_is_reported() -> None:
    system = PolicySystem(matrices=[sparse.csr_matrix(np.zeros((2, 2)))], rhs=[np.ones(2)])

    with pytest.raises(SingularSystemError):
        howard_solve(system, SolverConfig())


def test_value_iteration_needs_a_positive_diagonal() -> None:
    with pytest.raises(SingularSystemError):
        value_iteration(_scalar_system((0.0, 1.0)))


def test_policy_system_freezes_rows_per_control() -> None:
    system = PolicySystem(
        matrices=[sparse.csr_matrix(np.eye(2)), sparse.csr_matrix(2.0 * np.eye(2))],
        rhs=[np.array([1.0, 2.0]), np.array([3.0, 4.0])],
    )

    matrix, rhs = system.frozen(np.array([1, 0]))

    np.testing.assert_allclose(matrix.toarray(), np.diag([2.0, 1.0]))
    np.testing.assert_allclose(rhs, [3.0, 2.0])


def test_dominating_control_converges_at_the_second_iteration() -> None:
    problem = manufactured_1d()
    grid = problem.grid_for(1 / 16, 1 / 16)
    solver = HJBSolver(problem, build_scheme(SchemeKind.KD, problem, grid), SolverConfig(theta=1.0))

    result = solver.step(solver.initial_level())

    assert result.howard is not None
    assert result.howard.iterations == 2
    assert result.howard.linear_solves == 1
    assert result.howard.policy_changes == 0
    assert np.all(result.policy == 1)
