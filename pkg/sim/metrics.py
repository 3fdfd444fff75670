"""Merge metrics computed from a trace."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy as np

from planner.domain import VehicleState, bumper_gap
from planner.rss import lateral_closing_speeds, lateral_safe_distance, longitudinal_safe_distance

if TYPE_CHECKING:
    from sim.trace import StepRecord, Trace

SETTLE_LATERAL = 0.2
SETTLE_SIDESLIP = 0.005
SETTLE_HOLD = 0.5
SIGN_DEADBAND = 1e-3
LANE_KEEP = "LaneKeep"


@dataclass(frozen=True, slots=True)
class Metrics:
    merge_time: float | None
    path_length: float
    max_abs_sideslip: float
    sideslip_sign_changes: int
    min_gap_ratio: float | None
    rss_violations: int
    completed: bool

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Metrics:
        names = {f.name for f in dataclasses.fields(cls)}
        if set(data) != names:
            msg = f"metrics keys must be exactly {sorted(names)}, got {sorted(data)}"
            raise ValueError(msg)
        return cls(**data)


class SettlementDetector:
    """Tracks when the ego has stayed centered in the target lane with negligible sideslip for ``hold`` seconds."""

    def __init__(self, target_y: float, hold: float = SETTLE_HOLD) -> None:
        self.target_y = target_y
        self.hold = hold
        self._since: float | None = None
        self.settled_at: float | None = None

    def update(self, t: float, y: float, sideslip: float) -> float | None:
        if self.settled_at is not None:
            return self.settled_at
        if abs(y - self.target_y) < SETTLE_LATERAL and abs(sideslip) < SETTLE_SIDESLIP:
            if self._since is None:
                self._since = t
            if t - self._since >= self.hold - 1e-9:
                self.settled_at = self._since
        else:
            self._since = None
        return self.settled_at


def sign_changes(values: np.ndarray, deadband: float = SIGN_DEADBAND) -> int:
    signs = np.sign(values[np.abs(values) > deadband])
    return int(np.count_nonzero(signs[1:] != signs[:-1])) if signs.size > 1 else 0


def _state(record: StepRecord, trace: Trace) -> VehicleState:
    spec = trace.vehicles[record.vid]
    return VehicleState(
        x=record.x,
        y=record.y,
        heading=record.psi,
        sideslip=record.beta,
        yaw_rate=record.r,
        speed_long=record.v,
        speed_lat=record.v * float(np.sin(record.psi + record.beta)),
        length=spec.length,
        width=spec.width,
        vid=record.vid,
    )


def gap_ratio(ego: VehicleState, others: list[VehicleState], trace: Trace) -> float | None:
    """Bumper gap over the longitudinal safe distance to the nearest laterally relevant vehicle ahead."""
    ego_rss = trace.vehicles[ego.vid].rss
    relevant = []
    for other in others:
        if other.x <= ego.x:
            continue
        other_rss = trace.vehicles[other.vid].rss
        v_e, v_o = lateral_closing_speeds(ego, other)
        d_lat = lateral_safe_distance(v_e, v_o, ego_rss, other_rss, ego.width, other.width)
        if abs(other.y - ego.y) < d_lat:
            relevant.append(other)
    if not relevant:
        return None
    leader = min(relevant, key=lambda o: o.x)
    d_long = longitudinal_safe_distance(
        ego.speed_long,
        leader.speed_long,
        ego_rss,
        trace.vehicles[leader.vid].rss.a_brake_max,
        ego.length,
        leader.length,
    )
    if d_long <= 0:
        return None
    return max(bumper_gap(ego, leader), 0.0) / d_long


def compute_metrics(trace: Trace) -> Metrics:
    """
    Summarize a run.

    The merge interval runs from the first non-LaneKeep ego record to settlement in the target lane. A
    run that never settles is not completed; its path and sideslip figures then cover everything from
    initiation (or the start) to the end of the trace.
    """
    ego_records = trace.for_vehicle(trace.ego_id)
    if not ego_records:
        msg = "trace has no ego records"
        raise ValueError(msg)

    initiated_at = next((r.t for r in ego_records if r.mode != LANE_KEEP), None)
    detector = SettlementDetector(trace.lane.main_center)
    settled_at = None
    if initiated_at is not None:
        for r in ego_records:
            if r.t >= initiated_at:
                settled_at = detector.update(r.t, r.y, r.beta)
                if settled_at is not None:
                    break

    start = ego_records[0].t if initiated_at is None else initiated_at
    end = ego_records[-1].t if settled_at is None else settled_at
    window = [r for r in ego_records if start - 1e-9 <= r.t <= end + 1e-9]
    xs = np.array([r.x for r in window])
    ys = np.array([r.y for r in window])
    betas = np.array([r.beta for r in window])
    path_length = float(np.hypot(np.diff(xs), np.diff(ys)).sum()) if len(window) > 1 else 0.0

    ratios = []
    if initiated_at is not None:
        for t, records in trace.by_time().items():
            if t < initiated_at - 1e-9:
                continue
            ego_rec = next((r for r in records if r.vid == trace.ego_id), None)
            if ego_rec is None:
                continue
            ego = _state(ego_rec, trace)
            others = [_state(r, trace) for r in records if r.vid != trace.ego_id]
            ratio = gap_ratio(ego, others, trace)
            if ratio is not None:
                ratios.append(ratio)

    return Metrics(
        merge_time=None if settled_at is None else settled_at - initiated_at,
        path_length=path_length,
        max_abs_sideslip=float(np.abs(betas).max()) if betas.size else 0.0,
        sideslip_sign_changes=sign_changes(betas),
        min_gap_ratio=min(ratios) if ratios else None,
        rss_violations=sum(1 for ratio in ratios if ratio < 1.0),
        completed=settled_at is not None,
    )
