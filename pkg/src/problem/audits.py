from __future__ import annotations

from typing import Any, Callable, Optional

import numpy as np

from src.errors import ConfigError, MissingBarrierError
from src.grid.space_time import SpaceTimeGrid
from src.logging.run_logger import RunLogger
from src.problem.models import AuditReport, ControlProblem

IDENTITY_TOL = 1e-8
SEMINORM_TOL = 1e-6
ZERO_TOL = 1e-10
GROWTH_FLAG_RATIO = 1.2
MAX_FINE_NODES = 20_000
MAX_TIME_SAMPLES = 33

_COEFFICIENTS = ("sigma", "drift", "discount", "running_cost")


def sample_grid(grid: SpaceTimeGrid, factor: int = 4) -> SpaceTimeGrid:
    """Spatial refinement used by the audits, capped so 2-D problems stay cheap."""
    while factor > 1 and np.prod([(n - 1) * factor + 1 for n in grid.nodes_per_axis]) > MAX_FINE_NODES:
        factor //= 2
    return grid.refine(factor)


def sample_times(grid: SpaceTimeGrid) -> np.ndarray:
    count = min(4 * grid.n_steps, MAX_TIME_SAMPLES - 1) + 1
    return np.linspace(0.0, grid.horizon, count)


def audit_A1(
    p: ControlProblem,
    grid: SpaceTimeGrid,
    samples: int,
    seed: int = 0,
    logger: Optional[RunLogger] = None,
) -> AuditReport:
    if samples < 2:
        raise ValueError(f"audit_A1 needs at least 2 samples, got {samples}")
    rng = np.random.default_rng(seed)
    fine = sample_grid(grid)
    times = sample_times(grid)

    psi0 = _evaluate("psi0", lambda: p.initial_values(fine.points))
    psi0_lip = _adjacent_quotient(fine, psi0.reshape(1, -1, 1))[0]
    details: dict[str, Any] = {"psi0": {"seminorm": psi0_lip}}
    flags: list[str] = []
    witness: Optional[dict[str, Any]] = None
    best_quotient = psi0_lip
    c0 = psi0_lip
    count = fine.n_nodes
    min_eig = np.inf

    lo = np.asarray(p.lower)
    hi = np.asarray(p.upper)
    xa = lo + rng.random((samples, p.dim)) * (hi - lo)
    xb = lo + rng.random((samples, p.dim)) * (hi - lo)
    ta_idx = rng.integers(0, len(times), samples)
    tb_idx = rng.integers(0, len(times), samples)
    ta, tb = times[ta_idx], times[tb_idx]
    pair_distance = np.linalg.norm(xa - xb, axis=1) + np.sqrt(np.abs(ta - tb))

    for name in _COEFFICIENTS:
        per_control: list[float] = []
        summary: dict[str, Any] = {}
        for alpha in p.controls:
            field = _field(p, name, alpha)
            stack = np.stack([_evaluate(name, lambda tv=tv: field(tv, fine.points)) for tv in times])
            if name == "sigma":
                a = 0.5 * np.einsum("tnip,tnjp->tnij", stack, stack)
                min_eig = min(min_eig, float(np.linalg.eigvalsh(a.reshape(-1, p.dim, p.dim)).min()))
            flat = stack.reshape(stack.shape[0], stack.shape[1], -1)
            sup = float(np.max(np.linalg.norm(flat, axis=2)))
            spatial, where = _adjacent_quotient(fine, flat)
            temporal = 0.0
            if len(times) > 1:
                temporal = float(
                    np.max(np.linalg.norm(np.diff(flat, axis=0), axis=2)) / np.sqrt(times[1] - times[0])
                )
            va = _at_sample_times(field, times, ta_idx, xa)
            vb = _at_sample_times(field, times, tb_idx, xb)
            diffs = np.linalg.norm((va - vb).reshape(samples, -1), axis=1)
            ok = pair_distance > 0
            random_q = float(np.max(diffs[ok] / pair_distance[ok])) if ok.any() else 0.0
            seminorm = max(spatial, temporal, random_q)
            growth = _growth_ratio(p, fine, field, times, spatial)
            if growth is not None and growth > GROWTH_FLAG_RATIO:
                flags.append(f"{name}[{alpha}] suspected non-Lipschitz (quotient growth {growth:.3f})")
            if seminorm > best_quotient:
                best_quotient = seminorm
                t_idx, n_idx = where
                witness = {"t": float(times[t_idx]), "x": fine.points[n_idx].tolist(), "alpha": alpha, "field": name}
            per_control.append(sup + seminorm)
            summary[str(alpha)] = {"sup": sup, "seminorm": seminorm, "growth": growth}
            count += stack.shape[0] * stack.shape[1] + 2 * samples
        details[name] = summary
        c0 += max(per_control)

    details["min_diffusion_eigenvalue"] = min_eig
    if min_eig < -1e-12:
        flags.append(f"diffusion matrix not PSD (min eigenvalue {min_eig:.3e})")
    report = AuditReport(
        assumption="A1",
        sampled_max=float(c0),
        sample_count=int(count),
        passed=bool(np.isfinite(c0)),
        witness=witness,
        details=details,
        flags=flags,
    )
    _log(logger, report)
    return report


def audit_A2(
    p: ControlProblem,
    grid: SpaceTimeGrid,
    samples: int,
    seed: int = 0,
    logger: Optional[RunLogger] = None,
) -> AuditReport:
    if p.barrier is None:
        raise MissingBarrierError(f"Problem '{p.name}' has no barrier function")
    rng = np.random.default_rng(seed)
    fine = sample_grid(grid)
    times = sample_times(grid)
    interior = fine.points[fine.interior_indices]
    boundary = fine.points[fine.boundary_indices]

    lo = np.asarray(p.lower)
    hi = np.asarray(p.upper)
    rand_x = lo + (0.001 + 0.998 * rng.random((samples, p.dim))) * (hi - lo)
    rand_t_idx = rng.integers(0, len(times), samples)

    lhs_max = -np.inf
    witness: Optional[dict[str, Any]] = None
    zeta_min = np.inf
    zeta_boundary = 0.0
    count = 0

    batches = [(float(tv), interior) for tv in times]
    batches += [(float(times[k]), rand_x[rand_t_idx == k]) for k in np.unique(rand_t_idx)]
    for tv, pts in batches:
        jet = p.barrier(tv, pts)
        zeta_min = min(zeta_min, float(np.min(jet.value)))
        for alpha in p.controls:
            a = p.diffusion(alpha, tv, pts)
            b = p.drift_at(alpha, tv, pts)
            c = p.discount_at(alpha, tv, pts)
            lhs = (
                -jet.time_derivative
                + np.einsum("ni,ni->n", b, jet.gradient)
                + np.einsum("nij,nij->n", a, jet.hessian)
                + c * jet.value
            )
            k = int(np.argmax(lhs))
            if lhs[k] > lhs_max:
                lhs_max = float(lhs[k])
                witness = {"t": tv, "x": pts[k].tolist(), "alpha": alpha}
            count += lhs.shape[0]
    for tv in times[times > 0]:
        zeta_boundary = max(zeta_boundary, float(np.max(np.abs(p.barrier(float(tv), boundary).value))))

    inequality_ok = lhs_max <= -1.0 + IDENTITY_TOL
    positive_ok = zeta_min > 0.0
    boundary_ok = zeta_boundary <= ZERO_TOL
    flags = []
    if not positive_ok:
        flags.append(f"barrier not positive in the interior (min {zeta_min:.3e})")
    if not boundary_ok:
        flags.append(f"barrier does not vanish on the lateral boundary (max {zeta_boundary:.3e})")
    report = AuditReport(
        assumption="A2",
        sampled_max=lhs_max,
        sample_count=count,
        passed=bool(inequality_ok and positive_ok and boundary_ok),
        witness=witness,
        details={"zeta_min_interior": zeta_min, "zeta_max_boundary": zeta_boundary},
        flags=flags,
    )
    _log(logger, report)
    return report


def audit_A3(p: ControlProblem, grid: SpaceTimeGrid, logger: Optional[RunLogger] = None) -> AuditReport:
    if p.barrier is None:
        raise MissingBarrierError(f"Problem '{p.name}' has no barrier function")
    fine = sample_grid(grid)
    pts = fine.points
    zeta = p.barrier(0.0, pts).value
    gap = np.abs(p.initial_values(pts) - p.boundary_values(0.0, pts))
    positive = zeta > 0.0
    ratios = np.zeros_like(gap)
    ratios[positive] = gap[positive] / zeta[positive]
    c1 = float(ratios.max()) if positive.any() else 0.0
    mismatch = float(gap[~positive].max()) if (~positive).any() else 0.0
    k = int(np.argmax(ratios))
    report = AuditReport(
        assumption="A3",
        sampled_max=c1,
        sample_count=int(pts.shape[0]),
        passed=bool(np.isfinite(c1) and mismatch <= ZERO_TOL),
        witness={"t": 0.0, "x": pts[k].tolist(), "alpha": None},
        details={"zero_set_mismatch": mismatch},
        flags=[] if mismatch <= ZERO_TOL else [f"initial/boundary data differ by {mismatch:.3e} where the barrier vanishes"],
    )
    _log(logger, report)
    return report


def bisect_barrier_parameter(
    make_problem: Callable[[float], ControlProblem],
    grid: SpaceTimeGrid,
    low: float,
    high: float,
    samples: int = 256,
    tol: float = 1e-3,
) -> float:
    """Smallest parameter value (to tol) at which audit_A2 passes.

    Assumes the audit fails at `low`, passes at `high`, and is monotone in between.
    """
    if audit_A2(make_problem(low), grid, samples).passed:
        return low
    if not audit_A2(make_problem(high), grid, samples).passed:
        raise ValueError(f"audit_A2 fails at the upper bracket {high}")
    while high - low > tol:
        mid = 0.5 * (low + high)
        if audit_A2(make_problem(mid), grid, samples).passed:
            high = mid
        else:
            low = mid
    return high


def _field(p: ControlProblem, name: str, alpha: Any) -> Callable[[float, np.ndarray], np.ndarray]:
    if name == "sigma":
        return lambda t, x: p.sigma_at(alpha, t, x)
    if name == "drift":
        return lambda t, x: p.drift_at(alpha, t, x)
    if name == "discount":
        return lambda t, x: p.discount_at(alpha, t, x)
    return lambda t, x: p.cost_at(alpha, t, x)


def _evaluate(name: str, fn: Callable[[], np.ndarray]) -> np.ndarray:
    try:
        values = np.asarray(fn(), dtype=float)
    except Exception as exc:  # noqa: BLE001
        raise ConfigError(f"Coefficient '{name}' failed to evaluate: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"Coefficient '{name}' produced non-finite values")
    return values


def _at_sample_times(
    field: Callable[[float, np.ndarray], np.ndarray],
    times: np.ndarray,
    time_index: np.ndarray,
    x: np.ndarray,
) -> np.ndarray:
    out: Optional[np.ndarray] = None
    for k in np.unique(time_index):
        rows = np.flatnonzero(time_index == k)
        values = _evaluate("pair", lambda: field(float(times[k]), x[rows]))
        if out is None:
            out = np.empty((x.shape[0],) + values.shape[1:])
        out[rows] = values
    assert out is not None
    return out


def _adjacent_quotient(fine: SpaceTimeGrid, flat: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Max |f(p) - f(q)| / dx over axis-adjacent node pairs, with its location.

    flat has shape (times, nodes, components).
    """
    shaped = flat.reshape((flat.shape[0],) + tuple(fine.nodes_per_axis) + (flat.shape[-1],))
    best, where = 0.0, (0, 0)
    for axis in range(fine.dim):
        diffs = np.linalg.norm(np.diff(shaped, axis=axis + 1), axis=-1) / fine.dx[axis]
        k = int(np.argmax(diffs))
        if diffs.flat[k] > best:
            best = float(diffs.flat[k])
            multi = np.unravel_index(k, diffs.shape)
            where = (int(multi[0]), int(np.ravel_multi_index(multi[1:], fine.nodes_per_axis)))
    return best, where


def _growth_ratio(
    p: ControlProblem,
    fine: SpaceTimeGrid,
    field: Callable[[float, np.ndarray], np.ndarray],
    times: np.ndarray,
    base_quotient: float,
) -> Optional[float]:
    if base_quotient <= SEMINORM_TOL:
        return None
    finer = fine.refine(2)
    probe_times = np.unique(times[[0, len(times) // 2, -1]])
    stack = np.stack([_evaluate("refined", lambda tv=tv: field(float(tv), finer.points)) for tv in probe_times])
    coarse = np.stack([_evaluate("refined", lambda tv=tv: field(float(tv), fine.points)) for tv in probe_times])
    q_fine, _ = _adjacent_quotient(finer, stack.reshape(stack.shape[0], stack.shape[1], -1))
    q_coarse, _ = _adjacent_quotient(fine, coarse.reshape(coarse.shape[0], coarse.shape[1], -1))
    if q_coarse <= SEMINORM_TOL:
        return None
    return q_fine / q_coarse


def _log(logger: Optional[RunLogger], report: AuditReport) -> None:
    if logger is not None:
        logger.log_event("audit_completed", report.assumption, report.to_dict())
