from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from src.logging.run_logger import RunLogger, to_jsonable


def test_run_logger_writes_events_reports_and_tables(tmp_path: Path) -> None:
    logger = RunLogger(root=str(tmp_path), run_id="converge-abc12345")

    logger.log_event("rung_completed", "convergence", {"dx": 0.5, "err": np.float64(0.25)})
    logger.log_event("study_completed", "convergence", {"order": float("nan")})
    report_path = logger.write_report({"passed": True, "errors": np.array([1.0, 0.5])})
    table_path = logger.write_table(["dx", "order"], [[0.5, None], [0.25, 1.0]], gnuplot=True)

    run_dir = Path(logger.run_path())
    assert run_dir.parent == tmp_path
    assert run_dir.name.endswith("_converge-abc12345")

    events = [json.loads(line) for line in (run_dir / "events.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [e["type"] for e in events] == ["rung_completed", "study_completed"]
    assert events[0]["payload"] == {"dx": 0.5, "err": 0.25}
    assert events[1]["payload"]["order"] is None

    assert json.loads(report_path.read_text(encoding="utf-8")) == {"errors": [1.0, 0.5], "passed": True}
    assert table_path.read_text(encoding="utf-8").splitlines() == ["dx,order", "0.5,", "0.25,1.0"]
    assert (run_dir / "table.dat").read_text(encoding="utf-8").splitlines() == ["# dx order", "0.5 nan", "0.25 1.0"]


def test_to_jsonable_handles_numpy_and_nonfinite_values() -> None:
    value = {
        1: np.int64(3),
        "inf": float("inf"),
        "neg": -np.inf,
        "nested": (np.array([[1, 2]]), np.bool_(True)),
    }

    assert to_jsonable(value) == {"1": 3, "inf": "inf", "neg": "-inf", "nested": [[[1, 2]], True]}
