from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass
class HarnessConfig:
    seed: int = 7
    log_root: str = "runs"
    quiet: bool = False
    audit_samples: int = 10_000
    property_pairs: int = 100
    interior_margin: float = 0.1
    policy_tol: float = 1e-10
    policy_max_iters: int = 100
    linear_tol: float = 1e-12
    # Semi-Lagrangian stencil step h_s; None means the smallest grid spacing.
    stencil_step: Optional[float] = None
    sl_ladder: tuple[float, ...] = (1 / 16, 1 / 32, 1 / 64, 1 / 128, 1 / 256)
    kd_ladder: tuple[float, ...] = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
    barrier_ladder: tuple[float, ...] = (1 / 32, 1 / 64, 1 / 128)
    cfl_ladder: tuple[float, ...] = (1 / 32, 1 / 64, 1 / 128, 1 / 256)
    k_ladder: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    delta_ladder: tuple[float, ...] = (0.1, 0.05, 0.025)
    comparison_deltas: tuple[float, ...] = (1e-3, 1e-2, 1e-1)
    eps_ladder: tuple[float, ...] = (0.4, 0.2, 0.1)
    smoothing_eps: tuple[float, ...] = (0.1, 0.05, 0.025)
