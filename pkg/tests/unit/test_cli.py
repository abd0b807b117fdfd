from __future__ import annotations

import argparse
import csv
import json
from pathlib import Path

import pytest

from src.harness.cli import cli_main, parse_modes


def _only_run(out: Path) -> Path:
    runs = sorted(p for p in out.iterdir() if p.is_dir())
    assert len(runs) == 1
    return runs[0]


def test_parse_modes() -> None:
    assert parse_modes("0.5;1") == [[0.5], [1.0]]
    assert parse_modes("-1, 1; 0") == [[-1.0, 1.0], [0.0]]
    with pytest.raises(argparse.ArgumentTypeError, match="Empty mode"):
        parse_modes("0.5;;1")
    with pytest.raises(argparse.ArgumentTypeError, match="numeric"):
        parse_modes("low;high")


def test_unknown_subcommand_is_bad_input() -> None:
    assert cli_main(["integrate"]) == 2


def test_boundary_layer_command_writes_the_report(tmp_path: Path) -> None:
    out = tmp_path / "runs"

    code = cli_main(["boundary-layer", "--dx", "0.015625", "--out", str(out), "--quiet"])

    assert code == 0
    run_dir = _only_run(out)
    assert run_dir.name.split("_", 1)[1].startswith("boundary-layer-")
    report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    assert report["schema_version"] == 1
    assert report["command"] == "boundary-layer"
    assert report["passed"] is True
    assert report["u1_final"] >= report["lower_bound"]
    assert report["lower_bound"] > 0.25
    assert report["interior_err"] <= 0.02
    with (run_dir / "table.csv").open(encoding="utf-8") as handle:
        assert next(csv.reader(handle)) == ["t", "u1", "lower_bound"]
    assert (run_dir / "events.jsonl").exists()


def test_failed_check_exits_with_one(tmp_path: Path) -> None:
    # At dx = 1/16 the partial sum never clears 1/4.
    code = cli_main(["boundary-layer", "--dx", "0.0625", "--safety", "0.5", "--out", str(tmp_path), "--quiet"])

    assert code == 1
    report = json.loads((_only_run(tmp_path) / "report.json").read_text(encoding="utf-8"))
    assert report["passed"] is False


def test_converge_command_writes_a_gnuplot_table(tmp_path: Path) -> None:
    code = cli_main(
        [
            "converge",
            "--problem",
            "manufactured-1d",
            "--scheme",
            "kd",
            "--theta",
            "1",
            "--ladder",
            "0.125",
            "0.0625",
            "--out",
            str(tmp_path),
            "--quiet",
            "--gnuplot",
        ]
    )

    assert code == 0
    run_dir = _only_run(tmp_path)
    with (run_dir / "table.csv").open(encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["dx", "dt", "err_global", "err_interior", "order"]
    assert len(rows) == 3
    assert (run_dir / "table.dat").read_text(encoding="utf-8").startswith("# dx dt")


def test_bad_config_is_bad_input(tmp_path: Path) -> None:
    config_path = tmp_path / "config.yml"
    config_path.write_text("seed: 1\nturbo: true\n", encoding="utf-8")

    assert cli_main(["howard-check", "--config", str(config_path), "--out", str(tmp_path), "--quiet"]) == 2


def test_missing_problem_file_is_bad_input(tmp_path: Path) -> None:
    code = cli_main(["audit", "--problem", str(tmp_path / "absent.yml"), "--out", str(tmp_path), "--quiet"])

    assert code == 2
