from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np


@dataclass
class RunLogger:
    root: str
    run_id: str
    run_dir: Path = field(init=False)

    def __post_init__(self) -> None:
        ts = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        self.run_dir = Path(self.root) / f"{ts}_{self.run_id}"
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._events_path = self.run_dir / "events.jsonl"
        self._lock = threading.Lock()

    def log_event(self, event_type: str, stage: str, payload: dict[str, Any]) -> None:
        self._write_jsonl(
            self._events_path,
            {
                "ts": datetime.now(timezone.utc).isoformat(),
                "type": event_type,
                "stage": stage,
                "payload": to_jsonable(payload),
            },
        )

    def write_report(self, report: Mapping[str, Any], name: str = "report.json") -> Path:
        path = self.run_dir / name
        with self._lock:
            path.write_text(json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def write_table(
        self,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
        name: str = "table.csv",
        gnuplot: bool = False,
    ) -> Path:
        path = self.run_dir / name
        materialized = [list(to_jsonable(list(row))) for row in rows]
        with self._lock:
            with path.open("w", encoding="utf-8", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(columns)
                writer.writerows(["" if value is None else value for value in row] for row in materialized)
            if gnuplot:
                dat_path = path.with_suffix(".dat")
                with dat_path.open("w", encoding="utf-8") as handle:
                    handle.write("# " + " ".join(columns) + "\n")
                    for row in materialized:
                        handle.write(" ".join("nan" if value is None else repr(value) for value in row) + "\n")
        return path

    def _write_jsonl(self, path: Path, obj: dict[str, Any]) -> None:
        with self._lock:
            with path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(obj, ensure_ascii=False) + "\n")

    def run_path(self) -> str:
        return str(self.run_dir)


def to_jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return to_jsonable(value.item())
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
    return value
