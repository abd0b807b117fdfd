from __future__ import annotations

import warnings
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from src.errors import PolicyIterationError, SingularSystemError
from src.solver.models import HowardResult, PolicySystem, SolverConfig

REFINEMENT_STEPS = 3
# Iterates may creep up by rounding only.
MONOTONE_TOL = 1e-12


def howard_solve(system: PolicySystem, cfg: SolverConfig, initial: Optional[np.ndarray] = None) -> HowardResult:
    """Policy iteration for max_a (A_a r - f_a) = 0.

    Each sweep picks the control with the largest residual per row (lowest
    index on exact ties) and solves the frozen linear system. A row only
    switches control when the improvement is strictly positive, so rounding
    noise between equivalent controls cannot cycle.
    """
    n = system.size
    r = np.zeros(n) if initial is None else np.asarray(initial, dtype=float).copy()
    policy = _argmax(system.residuals(r))
    iterations = 1
    linear_solves = 0
    changes = 0
    monotone = True
    previous: Optional[np.ndarray] = None

    while True:
        matrix, rhs = system.frozen(policy)
        r = _solve_linear(matrix, rhs, cfg.linear_tol)
        linear_solves += 1
        if previous is not None and np.any(r > previous + MONOTONE_TOL * np.maximum(1.0, np.abs(previous))):
            monotone = False
        previous = r

        residuals = system.residuals(r)
        best = residuals.max(axis=0)
        residual = float(np.max(np.abs(best))) if n else 0.0
        candidate = _argmax(residuals)
        current = residuals[policy, np.arange(n)]
        improved = best > current + cfg.policy_tol * 1e-3
        new_policy = np.where(improved, candidate, policy)
        iterations += 1

        if not improved.any() and residual <= cfg.policy_tol:
            return HowardResult(
                values=r,
                policy=policy,
                iterations=iterations,
                linear_solves=linear_solves,
                policy_changes=changes,
                residual=residual,
                monotone=monotone,
            )
        if improved.any():
            changes += 1
        elif linear_solves > 1 and residual > cfg.policy_tol:
            # Same policy twice and still off: the linear solve cannot get closer.
            raise PolicyIterationError(f"Howard iteration stalled with residual {residual:.3e} > {cfg.policy_tol:.1e}")
        if iterations > cfg.policy_max_iters:
            raise PolicyIterationError(
                f"Howard iteration did not converge in {cfg.policy_max_iters} sweeps (residual {residual:.3e})"
            )
        policy = new_policy


def value_iteration(
    system: PolicySystem,
    tol: float = 1e-12,
    max_iters: int = 200_000,
    initial: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, int]:
    """Fixed point r = min_a (f_a + W_a r) / D_a for diagonally dominant M-matrices."""
    diagonals = [A.diagonal() for A in system.matrices]
    offdiag = [sparse.diags(D) - A for A, D in zip(system.matrices, diagonals)]
    if any(np.any(D <= 0.0) for D in diagonals):
        raise SingularSystemError("Value iteration needs a positive diagonal for every control")
    r = np.zeros(system.size) if initial is None else np.asarray(initial, dtype=float).copy()
    for sweep in range(1, max_iters + 1):
        updated = np.min(np.stack([(f + W @ r) / D for f, W, D in zip(system.rhs, offdiag, diagonals)]), axis=0)
        gap = float(np.max(np.abs(updated - r))) if r.size else 0.0
        r = updated
        if gap <= tol:
            return r, sweep
    raise PolicyIterationError(f"Value iteration did not reach {tol:.1e} in {max_iters} sweeps")


def _argmax(residuals: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximizer, i.e. the lowest control index.
    return np.argmax(residuals, axis=0)


def _solve_linear(matrix: sparse.csc_matrix, rhs: np.ndarray, tol: float) -> np.ndarray:
    if rhs.shape[0] == 0:
        return rhs.copy()
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            x = np.asarray(spsolve(matrix, rhs), dtype=float).reshape(-1)
            scale = max(1.0, float(np.max(np.abs(rhs))))
            for _ in range(REFINEMENT_STEPS):
                correction = rhs - matrix @ x
                if float(np.max(np.abs(correction))) <= tol * scale:
                    break
                x = x + np.asarray(spsolve(matrix, correction), dtype=float).reshape(-1)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystemError(f"Policy system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("Policy system solve produced non-finite values")
    return x
