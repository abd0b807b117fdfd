from __future__ import annotations

import math
from typing import Any, Optional, Sequence

from rich import box
from rich.console import Console, Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

# Scalars shown in the overview; everything else lives in the rung table.
OVERVIEW_SKIP = {"schema_version", "command", "passed"}


def format_value(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return str(value)
        return f"{value:.4g}"
    return str(value)


class ReportDisplay:
    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def render(
        self,
        report: dict[str, Any],
        columns: Sequence[str],
        rows: Sequence[Sequence[Any]],
        run_path: Optional[str] = None,
    ) -> Group:
        passed = bool(report.get("passed"))
        overview = Table(show_header=False, box=box.SIMPLE, pad_edge=False)
        overview.add_column("key", style="bold")
        overview.add_column("value")
        for key, value in report.items():
            if key in OVERVIEW_SKIP or isinstance(value, (dict, list, tuple)):
                continue
            overview.add_row(key, format_value(value))
        if run_path:
            overview.add_row("artifacts", run_path)

        table = Table(show_header=True, box=box.SIMPLE, pad_edge=False)
        for name in columns:
            table.add_column(name, justify="right")
        for row in rows:
            table.add_row(*(format_value(v) for v in row))
        if not rows:
            table.add_row(*(["-"] * len(columns)))

        verdict = Text("PASS", style="bold green") if passed else Text("FAIL", style="bold red")
        title = Text.assemble((str(report.get("command", "report")), "bold cyan"), "  ", verdict)
        return Group(Panel(overview, title=title, box=box.ROUNDED), table)

    def show(
        self,
        report: dict[str, Any],
        columns: Sequence[str],
        rows: Sequence[Sequence[Any]],
        run_path: Optional[str] = None,
    ) -> None:
        self.console.print(self.render(report, columns, rows, run_path))

    def error(self, message: str) -> None:
        self.console.print(Text(message, style="bold red"))
