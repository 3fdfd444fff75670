# render_report.py

from typing import TYPE_CHECKING, Literal

if TYPE_CHECKING:
    from sim.compare import Comparison

RenderFormat = Literal["markdown", "text"]

METRIC_COLUMNS = (
    "completed",
    "merge_time",
    "path_length",
    "max_abs_sideslip",
    "sideslip_sign_changes",
    "min_gap_ratio",
    "rss_violations",
)
MISSING = "n/a"


def _cell(value: object) -> str:
    if value is None:
        return MISSING
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.4f}" if abs(value) < 1 else f"{value:.2f}"
    return str(value)


def _pct(value: float | None) -> str:
    return MISSING if value is None else f"{value:+.1f}%"


def _table(header: list[str], rows: list[list[str]], render_format: RenderFormat) -> list[str]:
    if render_format == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return lines
    widths = [max(len(cell) for cell in column) for column in zip(header, *rows, strict=True)]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(header, widths, strict=True)).rstrip()]
    lines.append("  ".join("-" * width for width in widths))
    lines += ["  ".join(cell.ljust(width) for cell, width in zip(row, widths, strict=True)).rstrip() for row in rows]
    return lines


def render_comparison(comparison: "Comparison", render_format: RenderFormat = "text") -> str:
    """Metrics table followed by the pairwise merge-time and path-length deltas."""
    if render_format not in {"markdown", "text"}:
        msg = f"Unsupported format: {render_format}"
        raise ValueError(msg)

    metric_rows = [
        [row.name, *(_cell(getattr(row.metrics, column)) for column in METRIC_COLUMNS)] for row in comparison.rows
    ]
    delta_rows = [[d.base, d.other, _pct(d.merge_time_pct), _pct(d.path_length_pct)] for d in comparison.deltas]

    heading = "## Metrics" if render_format == "markdown" else "Metrics"
    lines = [heading, ""]
    lines += _table(["scenario", *METRIC_COLUMNS], metric_rows, render_format)
    lines += ["", "## Deltas" if render_format == "markdown" else "Deltas", ""]
    lines += _table(["base", "other", "merge_time", "path_length"], delta_rows, render_format)
    return "\n".join(lines) + "\n"
