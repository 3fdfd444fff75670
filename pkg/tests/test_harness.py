from __future__ import annotations

import itertools
from typing import TYPE_CHECKING, Any

import pytest

from config.schema import validate_scenario
from persistence.file_store import TRACE_FILE, RunDirectorySink
from planner.merge_rules import Mode
from sim.compare import run_sweep, sweep_documents
from sim.harness import decision_times, final_state, run_scenario
from tests.conftest import load_bundled

if TYPE_CHECKING:
    from pathlib import Path

    from sim.trace import StepRecord, Trace


@pytest.fixture
def open_gap(scenario_document: dict[str, Any]) -> dict[str, Any]:
    scenario_document["duration"] = 20.0
    return scenario_document


def test_open_gap_merge_completes(open_gap: dict[str, Any]) -> None:
    trace, metrics = run_scenario(validate_scenario(open_gap))
    assert metrics.completed
    assert metrics.rss_violations == 0
    first_merge = decision_times(trace, Mode.MERGE_NON_COOP)[0]
    assert first_merge == pytest.approx(1.0, abs=open_gap["dt"] + 1e-9)
    assert all(d.mode == Mode.LANE_KEEP for d in trace.decisions if d.t < 1.0 - 1e-9)
    assert final_state(trace, "ego").y == pytest.approx(0.0, abs=0.2)
    assert final_state(trace, "ego").t < open_gap["duration"]
    assert trace.messages == []


def test_records_are_ordered_by_time_then_scenario_order(open_gap: dict[str, Any]) -> None:
    trace, _ = run_scenario(validate_scenario(open_gap))
    assert [r.vid for r in trace.records[:4]] == ["ego", "o1", "ego", "o1"]
    times = [r.t for r in trace.records]
    assert times == sorted(times)


def test_silent_obstacle_triggers_the_fallback() -> None:
    scenario = validate_scenario(load_bundled("silent_fallback"))
    trace, _ = run_scenario(scenario)
    assert decision_times(trace, Mode.NEGOTIATE_COOP)[0] == pytest.approx(1.0, abs=scenario.dt + 1e-9)
    assert decision_times(trace, Mode.MERGE_NON_COOP)[0] == pytest.approx(2.0, abs=scenario.dt + 1e-9)
    assert Mode.MERGE_COOP not in {d.mode for d in trace.decisions}
    assert all(m.payload["kind"] == "request" for m in trace.messages)


def test_halt_stops_before_the_side_lane_ends() -> None:
    scenario = validate_scenario(load_bundled("halt_short_lane"))
    trace, metrics = run_scenario(scenario)
    assert decision_times(trace, Mode.HALT)
    before_gap = [r for r in trace.for_vehicle("ego") if r.t < 15.0]
    assert max(r.x for r in before_gap) < scenario.lane.side_lane_end_x
    assert min(r.v for r in before_gap) < 0.5
    assert metrics.completed


def test_despawned_vehicles_stop_recording() -> None:
    scenario = validate_scenario(load_bundled("halt_short_lane"))
    trace, _ = run_scenario(scenario)
    assert final_state(trace, "o11").t < 15.0
    assert final_state(trace, "o10").t > 15.0


def test_cooperation_merges_no_slower_in_a_tight_gap() -> None:
    _, noncoop = run_scenario(validate_scenario(load_bundled("tight_gap_noncoop")))
    coop_trace, coop = run_scenario(validate_scenario(load_bundled("situation3_coop_ahead")))
    assert coop.completed
    assert noncoop.completed
    assert coop.merge_time <= noncoop.merge_time
    assert decision_times(coop_trace, Mode.MERGE_COOP)
    assert any(m.payload.get("reply") == "Accept" for m in coop_trace.messages)


def test_runs_are_deterministic(tmp_path: Path) -> None:
    document = load_bundled("situation3_coop_ahead")
    outputs = []
    for name in ("first", "second"):
        trace, metrics = run_scenario(validate_scenario(document))
        sink = RunDirectorySink(tmp_path / name, plots=False)
        sink.write_run(document, trace, metrics)
        outputs.append((tmp_path / name / TRACE_FILE).read_bytes())
    assert outputs[0] == outputs[1]


def test_unknown_vehicle_has_no_final_state(open_gap: dict[str, Any]) -> None:
    trace, _ = run_scenario(validate_scenario(open_gap))
    with pytest.raises(KeyError):
        final_state(trace, "o9")


@pytest.mark.parametrize(
    "name",
    ["situation1_noncoop_ahead", "situation2_noncoop_behind", "situation3_coop_ahead", "situation4_coop_behind"],
)
def test_demo_scenarios_keep_the_safe_distance(name: str) -> None:
    _, metrics = run_scenario(validate_scenario(load_bundled(name)))
    assert metrics.completed
    assert metrics.rss_violations == 0


def test_non_cooperative_merge_does_not_oscillate() -> None:
    _, metrics = run_scenario(validate_scenario(load_bundled("situation1_noncoop_ahead")))
    assert metrics.max_abs_sideslip <= 0.02
    assert metrics.sideslip_sign_changes <= 2


def ego_at(trace: Trace, t: float) -> StepRecord:
    return next(r for r in trace.for_vehicle("ego") if abs(r.t - t) < 1e-6)


def test_cooperative_obstacle_yields_while_the_ego_holds_speed() -> None:
    trace, metrics = run_scenario(validate_scenario(load_bundled("situation3_coop_ahead")))
    assert metrics.completed
    assert metrics.rss_violations == 0
    ego = trace.for_vehicle("ego")
    v0 = ego[0].v
    assert max(abs(r.v - v0) for r in ego) <= 0.5
    assert max(abs(r.beta) for r in ego) <= 0.03

    p_c = next(p.path.p_c for p in trace.paths if p.mode == Mode.MERGE_COOP)
    crossed_at = next(r.t for r in ego if r.x >= p_c)
    yielding_at = next(r.t for r in trace.for_vehicle("o1") if r.accel < 0)
    assert yielding_at < crossed_at


def test_halving_the_step_barely_moves_the_outcome() -> None:
    document = load_bundled("situation1_noncoop_ahead")
    coarse_trace, coarse = run_scenario(validate_scenario(document))
    document["dt"] = document["dt"] / 2
    fine_trace, fine = run_scenario(validate_scenario(document))
    assert coarse.merge_time is not None
    assert fine.merge_time is not None
    assert abs(fine.merge_time - coarse.merge_time) < 0.05

    fine_end = final_state(fine_trace, "ego").t
    t_common = max(r.t for r in coarse_trace.for_vehicle("ego") if r.t <= fine_end + 1e-9)
    a, b = ego_at(coarse_trace, t_common), ego_at(fine_trace, t_common)
    assert abs(a.x - b.x) < 0.05
    assert abs(a.y - b.y) < 0.05


def test_longer_channel_delay_never_speeds_up_the_cooperative_merge() -> None:
    points = sweep_documents(load_bundled("situation3_coop_ahead"), [("channel.delay", [0.0, 0.1, 0.2, 0.3])])
    merge_times = [row["merge_time"] for row in run_sweep(points)]
    assert None not in merge_times
    assert all(later >= earlier - 1e-9 for earlier, later in itertools.pairwise(merge_times))
