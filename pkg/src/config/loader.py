from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from src.config.settings import HarnessConfig

_LADDER_FIELDS = (
    "sl_ladder",
    "kd_ladder",
    "barrier_ladder",
    "cfl_ladder",
    "k_ladder",
    "delta_ladder",
    "comparison_deltas",
    "eps_ladder",
    "smoothing_eps",
)


def load_harness_config(path: str = "config.yml") -> HarnessConfig:
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    with config_path.open("r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle) or {}

    if not isinstance(data, dict):
        raise ValueError("config.yml must contain a top-level mapping")

    normalized = _normalize_config_values(data)
    known = set(HarnessConfig.__dataclass_fields__)
    unknown = sorted(set(normalized) - known)
    if unknown:
        raise ValueError(f"config.yml has unknown fields: {', '.join(unknown)}")
    return HarnessConfig(**normalized)


def _normalize_config_values(data: dict[str, Any]) -> dict[str, Any]:
    values = dict(data)
    for name in _LADDER_FIELDS:
        if name not in values:
            continue
        raw = values[name]
        if not isinstance(raw, list) or not raw:
            raise ValueError(f"config.yml field '{name}' must be a non-empty list of numbers")
        ladder = tuple(float(x) for x in raw)
        if any(x <= 0 for x in ladder):
            raise ValueError(f"config.yml field '{name}' must contain positive values only")
        values[name] = ladder

    for name in ("policy_tol", "linear_tol", "interior_margin"):
        if name in values:
            values[name] = float(values[name])
            if values[name] <= 0:
                raise ValueError(f"config.yml field '{name}' must be positive")
    if values.get("stencil_step") is not None:
        values["stencil_step"] = float(values["stencil_step"])
        if values["stencil_step"] <= 0:
            raise ValueError("config.yml field 'stencil_step' must be positive")
    for name in ("seed", "audit_samples", "property_pairs", "policy_max_iters"):
        if name in values:
            values[name] = int(values[name])
    if "quiet" in values:
        values["quiet"] = bool(values["quiet"])
    if "log_root" in values:
        values["log_root"] = str(values["log_root"]).strip() or "runs"
    return values
