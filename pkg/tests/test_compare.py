from __future__ import annotations

import copy
from typing import Any

import pytest

from config.schema import ConfigValidationError, validate_scenario
from render_report import render_comparison
from sim.compare import (
    Comparison,
    ComparisonRow,
    compare_scenarios,
    pair_delta,
    percent_delta,
    run_sweep,
    sweep_documents,
)
from sim.metrics import Metrics


def metrics(merge_time: float | None, path_length: float, *, completed: bool = True) -> Metrics:
    return Metrics(
        merge_time=merge_time,
        path_length=path_length,
        max_abs_sideslip=0.01,
        sideslip_sign_changes=1,
        min_gap_ratio=None,
        rss_violations=0,
        completed=completed,
    )


@pytest.fixture
def open_gap(scenario_document: dict[str, Any]) -> dict[str, Any]:
    scenario_document["duration"] = 20.0
    return scenario_document


def test_percent_delta() -> None:
    assert percent_delta(4.0, 3.0) == pytest.approx(-25.0)
    assert percent_delta(None, 3.0) is None
    assert percent_delta(0.0, 3.0) is None


def test_pair_delta_needs_two_completed_runs() -> None:
    done = ComparisonRow("a", metrics(4.0, 100.0))
    faster = ComparisonRow("b", metrics(3.0, 90.0))
    stuck = ComparisonRow("c", metrics(None, 40.0, completed=False))
    delta = pair_delta(done, faster)
    assert delta.merge_time_pct == pytest.approx(-25.0)
    assert delta.path_length_pct == pytest.approx(-10.0)
    assert pair_delta(done, stuck).merge_time_pct is None


def test_comparison_needs_two_scenarios(open_gap: dict[str, Any]) -> None:
    with pytest.raises(ValueError, match="at least two"):
        compare_scenarios([validate_scenario(open_gap)])


def test_compare_labels_duplicate_names(open_gap: dict[str, Any]) -> None:
    slower = copy.deepcopy(open_gap)
    slower["vehicles"][0]["speed"] = 18.0
    comparison, traces = compare_scenarios([validate_scenario(open_gap), validate_scenario(slower)])
    assert [row.name for row in comparison.rows] == ["unit_scenario", "unit_scenario#1"]
    assert set(traces) == {"unit_scenario", "unit_scenario#1"}
    assert len(comparison.deltas) == 1
    document = comparison.to_dict()
    assert document["rows"][0]["name"] == "unit_scenario"
    assert set(document["deltas"][0]) == {"base", "other", "merge_time_pct", "path_length_pct"}


def test_render_comparison_formats() -> None:
    comparison = Comparison(
        rows=(ComparisonRow("a", metrics(4.0, 100.0)), ComparisonRow("b", metrics(None, 40.0, completed=False))),
        deltas=(pair_delta(ComparisonRow("a", metrics(4.0, 100.0)), ComparisonRow("b", metrics(None, 40.0))),),
    )
    markdown = render_comparison(comparison, "markdown")
    assert markdown.startswith("## Metrics")
    assert "| scenario | completed | merge_time |" in markdown
    assert "| a | yes | 4.00 | 100.00 |" in markdown
    text = render_comparison(comparison)
    assert "n/a" in text
    assert "Deltas" in text
    with pytest.raises(ValueError, match="Unsupported format"):
        render_comparison(comparison, "html")  # type: ignore[arg-type]


def test_sweep_expands_the_cartesian_grid(open_gap: dict[str, Any]) -> None:
    points = sweep_documents(open_gap, [("merge.rho_m", [2.0, 4.0]), ("vehicles.ego.speed", [18.0, 20.0])])
    assert [assignment for assignment, _ in points] == [
        {"merge.rho_m": 2.0, "vehicles.ego.speed": 18.0},
        {"merge.rho_m": 2.0, "vehicles.ego.speed": 20.0},
        {"merge.rho_m": 4.0, "vehicles.ego.speed": 18.0},
        {"merge.rho_m": 4.0, "vehicles.ego.speed": 20.0},
    ]
    assert points[0][1].merge.rho_m == 2.0
    assert open_gap.get("merge") is None


def test_sweep_reports_every_invalid_point(open_gap: dict[str, Any]) -> None:
    with pytest.raises(ConfigValidationError) as info:
        sweep_documents(open_gap, [("dt", [0.0, 0.02, 0.1])])
    assert len(info.value.errors) == 2
    assert info.value.errors[0].startswith("[dt=0.0] dt:")


def test_run_sweep_rows(open_gap: dict[str, Any]) -> None:
    rows = run_sweep(sweep_documents(open_gap, [("merge.t_m_dec", [0.5, 1.0])]))
    assert [row["merge.t_m_dec"] for row in rows] == [0.5, 1.0]
    assert all(row["completed"] for row in rows)
    assert set(rows[0]) == {"merge.t_m_dec", *Metrics.__dataclass_fields__}
