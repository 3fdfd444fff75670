from __future__ import annotations

import json
from typing import TYPE_CHECKING, Any

import pytest

from config.schema import validate_scenario
from persistence.file_store import (
    FIELD_PLOT,
    MESSAGES_FILE,
    MOTION_PLOT,
    PATHS_DIR,
    TRACE_FILE,
    XY_PLOT,
    RunDirectorySink,
    read_fields,
    read_metrics,
    read_paths,
    read_scenario,
    read_trace,
    render_plots,
)
from sim.harness import FIELD_COLUMNS, FIELD_ROWS, FORCE_COLUMNS, FORCE_ROWS, run_scenario
from utils import get_sink

if TYPE_CHECKING:
    from pathlib import Path

    from sim.metrics import Metrics
    from sim.trace import Trace


@pytest.fixture
def finished_run(scenario_document: dict[str, Any]) -> tuple[dict[str, Any], Trace, Metrics]:
    scenario_document["duration"] = 20.0
    trace, metrics = run_scenario(validate_scenario(scenario_document))
    return scenario_document, trace, metrics


def test_run_directory_layout(finished_run: tuple[dict[str, Any], Trace, Metrics], tmp_path: Path) -> None:
    document, trace, metrics = finished_run
    sink = RunDirectorySink(tmp_path / "run")
    sink.write_run(document, trace, metrics)
    sink.close()
    run_dir = tmp_path / "run"
    for name in (TRACE_FILE, MESSAGES_FILE, XY_PLOT, MOTION_PLOT):
        assert (run_dir / name).is_file()
    assert (run_dir / PATHS_DIR / "index.csv").is_file()
    assert read_scenario(run_dir) == document
    assert read_metrics(run_dir) == json.loads(json.dumps(metrics.to_dict()))


def test_trace_and_paths_read_back(finished_run: tuple[dict[str, Any], Trace, Metrics], tmp_path: Path) -> None:
    document, trace, metrics = finished_run
    RunDirectorySink(tmp_path, plots=False).write_run(document, trace, metrics)
    records = read_trace(tmp_path)
    assert len(records) == len(trace.records)
    assert [r.vid for r in records] == [r.vid for r in trace.records]
    assert [r.mode for r in records] == [r.mode for r in trace.records]
    assert records[-1].x == pytest.approx(trace.records[-1].x, rel=1e-9)
    paths = read_paths(tmp_path)
    assert len(paths) == len(trace.paths)
    assert paths[-1][2].shape == trace.paths[-1].path.waypoints.shape
    assert not (tmp_path / XY_PLOT).exists()


def test_plots_render_identically(finished_run: tuple[dict[str, Any], Trace, Metrics], tmp_path: Path) -> None:
    document, trace, metrics = finished_run
    RunDirectorySink(tmp_path, plots=False).write_run(document, trace, metrics)
    first = [p.read_bytes() for p in render_plots(tmp_path, trace.lane, trace.records, trace.ego_id)]
    second = [p.read_bytes() for p in render_plots(tmp_path, trace.lane, trace.records, trace.ego_id)]
    assert first == second


def test_field_snapshots_follow_merge_plans(
    finished_run: tuple[dict[str, Any], Trace, Metrics], tmp_path: Path
) -> None:
    document, trace, metrics = finished_run
    assert trace.fields
    assert [f.t for f in trace.fields] == [p.t for p in trace.paths if p.path.w != 0]
    RunDirectorySink(tmp_path).write_run(document, trace, metrics)
    fields = read_fields(tmp_path)
    assert len(fields) == len(trace.fields)
    t, p_c, grid, forces = fields[0]
    assert t == pytest.approx(trace.fields[0].t)
    assert p_c == pytest.approx(trace.fields[0].p_c)
    assert grid.shape == (FIELD_ROWS * FIELD_COLUMNS, 3)
    assert forces.shape == (FORCE_ROWS * FORCE_COLUMNS, 4)
    assert grid[:, 2] == pytest.approx(trace.fields[0].grid[:, 2], rel=1e-8)
    assert (tmp_path / FIELD_PLOT).is_file()


def test_missing_and_malformed_run_directories(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        read_trace(tmp_path)
    with pytest.raises(FileNotFoundError):
        read_metrics(tmp_path)
    with pytest.raises(FileNotFoundError):
        read_scenario(tmp_path)
    assert read_paths(tmp_path) == []
    assert read_fields(tmp_path) == []
    (tmp_path / TRACE_FILE).write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="Unexpected trace header"):
        read_trace(tmp_path)


def test_get_sink(tmp_path: Path) -> None:
    assert isinstance(get_sink({"path": tmp_path}), RunDirectorySink)
    with pytest.raises(NotImplementedError, match="not supported"):
        get_sink({"type": "database", "path": tmp_path})
