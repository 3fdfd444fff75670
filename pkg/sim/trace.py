"""Per-step simulation records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    import numpy as np

    from planner.domain import LaneGeometry, RssParams
    from planner.sigmoid_planner import SigmoidPath

TRACE_HEADER = ("t", "veh_id", "x", "y", "psi", "beta", "r", "v", "accel", "steer", "mode")


@dataclass(frozen=True, slots=True)
class StepRecord:
    t: float
    vid: str
    x: float
    y: float
    psi: float
    beta: float
    r: float
    v: float
    accel: float
    steer: float
    mode: str

    def row(self) -> tuple[Any, ...]:
        return (
            self.t, self.vid, self.x, self.y, self.psi, self.beta, self.r, self.v, self.accel, self.steer, self.mode
        )


@dataclass(frozen=True, slots=True)
class DecisionRecord:
    t: float
    mode: str
    target_gap: int | None
    v_ego_star: float | None
    v_obs_star: float | None
    cp_hint: float | None
    follower_id: str | None
    leader_id: str | None


@dataclass(frozen=True, slots=True)
class MessageEvent:
    t: float
    event: str
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"t": self.t, "event": self.event, **self.payload}


@dataclass(frozen=True, slots=True, eq=False)
class PathDump:
    t: float
    mode: str
    path: SigmoidPath


@dataclass(frozen=True, slots=True, eq=False)
class FieldDump:
    """Field around one planned merge: ``(x, y, P)`` grid rows and ``(x, y, F_x, F_y)`` force rows."""

    t: float
    p_c: float
    grid: np.ndarray
    forces: np.ndarray


@dataclass(frozen=True, slots=True)
class VehicleSpec:
    length: float
    width: float
    rss: RssParams


@dataclass(slots=True)
class Trace:
    """Everything a run produced; records are ordered by time, then by vehicle order in the scenario."""

    scenario: str
    dt: float
    ego_id: str
    lane: LaneGeometry
    vehicles: dict[str, VehicleSpec]
    records: list[StepRecord] = field(default_factory=list)
    decisions: list[DecisionRecord] = field(default_factory=list)
    messages: list[MessageEvent] = field(default_factory=list)
    paths: list[PathDump] = field(default_factory=list)
    fields: list[FieldDump] = field(default_factory=list)

    def for_vehicle(self, vid: str) -> list[StepRecord]:
        return [r for r in self.records if r.vid == vid]

    def by_time(self) -> dict[float, list[StepRecord]]:
        grouped: dict[float, list[StepRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.t, []).append(record)
        return grouped

    def mode_changes(self) -> list[tuple[float, str]]:
        """Ego (time, mode) pairs at every mode transition, starting with the initial mode."""
        changes: list[tuple[float, str]] = []
        for record in self.for_vehicle(self.ego_id):
            if not changes or changes[-1][1] != record.mode:
                changes.append((record.t, record.mode))
        return changes
