import csv
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from logging_config import get_logger
from persistence.base import TraceSink
from plots import save_field, save_motion_states, save_run_paths
from sim.trace import TRACE_HEADER, StepRecord

if TYPE_CHECKING:
    from planner.domain import LaneGeometry
    from sim.metrics import Metrics
    from sim.trace import Trace

logger = get_logger(__name__)

TRACE_FILE = "trace.csv"
MESSAGES_FILE = "messages.jsonl"
METRICS_FILE = "metrics.json"
SCENARIO_FILE = "scenario.json"
PATHS_DIR = "paths"
PATH_INDEX = "index.csv"
XY_PLOT = "xy_paths.svg"
MOTION_PLOT = "motion_states.svg"
FIELDS_DIR = "fields"
FIELD_INDEX = "index.csv"
FIELD_PLOT = "field.svg"


def _fmt(value: Any) -> Any:
    if isinstance(value, float):
        return format(value, ".10g")
    return value


class RunDirectorySink(TraceSink):
    """Writes one run's artifacts into a directory of its own."""

    def __init__(self, path: str | Path, plots: bool = True) -> None:
        self.path = Path(path)
        self.plots = plots

    def write_run(self, document: dict[str, Any], trace: "Trace", metrics: "Metrics") -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / SCENARIO_FILE).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
        self._write_trace(trace)
        self._write_messages(trace)
        (self.path / METRICS_FILE).write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
        self._write_paths(trace)
        self._write_fields(trace)
        if self.plots:
            render_plots(self.path, trace.lane, trace.records, trace.ego_id)
        logger.info("Wrote run artifacts to %s", self.path)

    def _write_trace(self, trace: "Trace") -> None:
        with (self.path / TRACE_FILE).open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for record in trace.records:
                writer.writerow([_fmt(v) for v in record.row()])

    def _write_messages(self, trace: "Trace") -> None:
        with (self.path / MESSAGES_FILE).open("w") as f:
            for event in trace.messages:
                f.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")

    def _write_paths(self, trace: "Trace") -> None:
        paths_dir = self.path / PATHS_DIR
        paths_dir.mkdir(exist_ok=True)
        with (paths_dir / PATH_INDEX).open("w", newline="") as index:
            index_writer = csv.writer(index, lineterminator="\n")
            index_writer.writerow(["file", "t", "mode", "w", "kappa", "p_c", "b"])
            for n, dump in enumerate(trace.paths):
                name = f"path_{n:03d}.csv"
                path = dump.path
                fields = (dump.t, dump.mode, path.w, path.kappa, path.p_c, path.b)
                index_writer.writerow([name, *(_fmt(v) for v in fields)])
                with (paths_dir / name).open("w", newline="") as f:
                    writer = csv.writer(f, lineterminator="\n")
                    writer.writerow(["x", "y", "heading"])
                    writer.writerows([[_fmt(float(v)) for v in row] for row in path.waypoints])

    def _write_fields(self, trace: "Trace") -> None:
        if not trace.fields:
            return
        fields_dir = self.path / FIELDS_DIR
        fields_dir.mkdir(exist_ok=True)
        with (fields_dir / FIELD_INDEX).open("w", newline="") as index:
            index_writer = csv.writer(index, lineterminator="\n")
            index_writer.writerow(["grid", "forces", "t", "p_c"])
            for n, dump in enumerate(trace.fields):
                grid_name, forces_name = f"field_{n:03d}.csv", f"forces_{n:03d}.csv"
                index_writer.writerow([grid_name, forces_name, _fmt(dump.t), _fmt(dump.p_c)])
                _write_rows(fields_dir / grid_name, ["x", "y", "P"], dump.grid)
                _write_rows(fields_dir / forces_name, ["x", "y", "F_x", "F_y"], dump.forces)

    def close(self) -> None:
        # Files are closed as soon as they are written.
        pass


def _write_rows(path: Path, header: list[str], rows: np.ndarray) -> None:
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_fmt(float(v)) for v in row] for row in rows])


def render_plots(run_dir: Path, lane: "LaneGeometry", records: list[StepRecord], ego_id: str) -> list[Path]:
    planned = [(f"plan {mode} @ {t:.2f}s", waypoints) for t, mode, waypoints in read_paths(run_dir)]
    planned = [(label, wp) for label, wp in planned if not np.allclose(wp[:, 1], wp[0, 1])]
    written = [
        save_run_paths(records, lane, run_dir / XY_PLOT, planned),
        save_motion_states(records, ego_id, run_dir / MOTION_PLOT),
    ]
    fields = read_fields(run_dir)
    if fields:
        _, p_c, grid, forces = fields[0]
        written.append(save_field(grid, forces, lane, run_dir / FIELD_PLOT, p_c))
    return written


def read_trace(run_dir: str | Path) -> list[StepRecord]:
    path = Path(run_dir) / TRACE_FILE
    if not path.exists():
        msg = f"No trace found in run directory: {run_dir}"
        raise FileNotFoundError(msg)
    records = []
    with path.open(newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != TRACE_HEADER:
            msg = f"Unexpected trace header in {path}: {reader.fieldnames}"
            raise ValueError(msg)
        for row in reader:
            records.append(
                StepRecord(
                    t=float(row["t"]),
                    vid=row["veh_id"],
                    x=float(row["x"]),
                    y=float(row["y"]),
                    psi=float(row["psi"]),
                    beta=float(row["beta"]),
                    r=float(row["r"]),
                    v=float(row["v"]),
                    accel=float(row["accel"]),
                    steer=float(row["steer"]),
                    mode=row["mode"],
                )
            )
    return records


def read_paths(run_dir: str | Path) -> list[tuple[float, str, np.ndarray]]:
    paths_dir = Path(run_dir) / PATHS_DIR
    index = paths_dir / PATH_INDEX
    if not index.exists():
        return []
    dumps = []
    with index.open(newline="") as f:
        for row in csv.DictReader(f):
            waypoints = np.loadtxt(paths_dir / row["file"], delimiter=",", skiprows=1, ndmin=2)
            dumps.append((float(row["t"]), row["mode"], waypoints))
    return dumps


def read_fields(run_dir: str | Path) -> list[tuple[float, float, np.ndarray, np.ndarray]]:
    """Field snapshots as ``(t, p_c, grid, forces)``, oldest first."""
    fields_dir = Path(run_dir) / FIELDS_DIR
    index = fields_dir / FIELD_INDEX
    if not index.exists():
        return []
    dumps = []
    with index.open(newline="") as f:
        for row in csv.DictReader(f):
            grid = np.loadtxt(fields_dir / row["grid"], delimiter=",", skiprows=1, ndmin=2)
            forces = np.loadtxt(fields_dir / row["forces"], delimiter=",", skiprows=1, ndmin=2)
            dumps.append((float(row["t"]), float(row["p_c"]), grid, forces))
    return dumps


def read_metrics(run_dir: str | Path) -> dict[str, Any]:
    path = Path(run_dir) / METRICS_FILE
    if not path.exists():
        msg = f"No metrics found in run directory: {run_dir}"
        raise FileNotFoundError(msg)
    with path.open() as f:
        return json.load(f)  # type: ignore[no-any-return]


def read_scenario(run_dir: str | Path) -> dict[str, Any]:
    path = Path(run_dir) / SCENARIO_FILE
    if not path.exists():
        msg = f"No scenario document found in run directory: {run_dir}"
        raise FileNotFoundError(msg)
    with path.open() as f:
        return json.load(f)  # type: ignore[no-any-return]
