from __future__ import annotations

import math

import numpy as np
import pytest

from planner.domain import LaneGeometry, RssParams
from planner.rss import longitudinal_safe_distance
from sim.metrics import Metrics, SettlementDetector, compute_metrics, gap_ratio, sign_changes
from sim.trace import StepRecord, Trace, VehicleSpec
from tests.conftest import vehicle

SPEC = VehicleSpec(length=4.6, width=1.8, rss=RssParams())


def record(t: float, x: float, y: float, beta: float = 0.0, mode: str = "LaneKeep") -> StepRecord:
    return StepRecord(t=t, vid="ego", x=x, y=y, psi=0.0, beta=beta, r=0.0, v=20.0, accel=0.0, steer=0.0, mode=mode)


def merge_trace() -> Trace:
    """Ego starts its merge at 1.0 s and moves 0.175 m left per 0.1 s step until it is centered."""
    trace = Trace(scenario="synthetic", dt=0.1, ego_id="ego", lane=LaneGeometry(), vehicles={"ego": SPEC})
    for k in range(51):
        t = round(k * 0.1, 10)
        if k < 10:
            trace.records.append(record(t, 2.0 * k, -3.5))
            continue
        beta = 0.01 if k < 20 else (-0.004 if k < 28 else 0.0)
        y = min(-3.5 + 0.175 * (k - 10), 0.0)
        trace.records.append(record(t, 2.0 * k, y, beta, "MergeNonCoop"))
    return trace


def test_merge_interval_metrics() -> None:
    metrics = compute_metrics(merge_trace())
    assert metrics.completed
    assert metrics.merge_time == pytest.approx(1.9)
    assert metrics.path_length == pytest.approx(19 * math.hypot(2.0, 0.175))
    assert metrics.max_abs_sideslip == pytest.approx(0.01)
    assert metrics.sideslip_sign_changes == 1
    assert metrics.min_gap_ratio is None
    assert metrics.rss_violations == 0


def test_run_that_never_initiates() -> None:
    trace = Trace(scenario="idle", dt=0.1, ego_id="ego", lane=LaneGeometry(), vehicles={"ego": SPEC})
    trace.records.extend(record(round(k * 0.1, 10), 2.0 * k, -3.5) for k in range(11))
    metrics = compute_metrics(trace)
    assert not metrics.completed
    assert metrics.merge_time is None
    assert metrics.path_length == pytest.approx(20.0)


def test_empty_trace_is_an_error() -> None:
    trace = Trace(scenario="empty", dt=0.1, ego_id="ego", lane=LaneGeometry(), vehicles={"ego": SPEC})
    with pytest.raises(ValueError, match="no ego records"):
        compute_metrics(trace)


def test_sign_changes_ignore_the_deadband() -> None:
    assert sign_changes(np.array([0.01, -0.02, 0.0005, 0.03, -0.01])) == 3
    assert sign_changes(np.array([0.0005, -0.0005])) == 0
    assert sign_changes(np.array([])) == 0


def test_settlement_starts_when_the_hold_begins() -> None:
    detector = SettlementDetector(target_y=0.0, hold=0.5)
    assert detector.update(0.0, 0.5, 0.0) is None
    for k in range(1, 7):
        detector.update(k * 0.1, 0.1, 0.001)
    assert detector.settled_at == pytest.approx(0.1)


def test_settlement_restarts_after_a_sideslip_excursion() -> None:
    detector = SettlementDetector(target_y=0.0, hold=0.5)
    detector.update(0.0, 0.0, 0.0)
    detector.update(0.3, 0.0, 0.01)
    for k in range(4, 10):
        detector.update(k * 0.1, 0.0, 0.0)
    assert detector.settled_at == pytest.approx(0.4)


def test_gap_ratio_uses_the_nearest_relevant_leader() -> None:
    trace = Trace(
        scenario="gap",
        dt=0.1,
        ego_id="ego",
        lane=LaneGeometry(),
        vehicles={"ego": SPEC, "lead": SPEC, "side": SPEC, "behind": SPEC},
    )
    ego = vehicle("ego", 0.0, 0.0)
    others = [vehicle("lead", 50.0, 0.0), vehicle("side", 30.0, -3.5), vehicle("behind", -20.0, 0.0)]
    d_long = longitudinal_safe_distance(20.0, 20.0, SPEC.rss, SPEC.rss.a_brake_max, 4.6, 4.6)
    assert gap_ratio(ego, others, trace) == pytest.approx(45.4 / d_long)
    assert gap_ratio(ego, [vehicle("behind", -20.0, 0.0)], trace) is None


def test_metrics_round_trip_through_dicts() -> None:
    metrics = compute_metrics(merge_trace())
    assert Metrics.from_dict(metrics.to_dict()) == metrics
    with pytest.raises(ValueError, match="exactly"):
        Metrics.from_dict({"merge_time": 1.0})
