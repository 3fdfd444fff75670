"""Scenario document validation.

A scenario is a JSON (or YAML) object::

    {
      "name": "situation1_noncoop_ahead",
      "duration": 30.0,
      "dt": 0.02,
      "coop_enabled": false,
      "lane": {...LaneGeometry fields...},
      "merge": {...MergeParams fields...},
      "field": {...FieldParams fields...},
      "planner": {...PlannerSettings fields...},
      "channel": {"delay": 0.1, "drop_probability": 0.0, "seed": 7},
      "vehicles": [{"id": "ego", "role": "ego", "x": 0.0, "y": -3.5, "speed": 20.0, ...}, ...],
      "events": [{"t": 15.0, "despawn": ["o3"]}]
    }

Every block except ``name``, ``duration`` and ``vehicles`` is optional. Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

from planner.domain import LaneGeometry, MergeParams, ParameterError, RssParams, VehicleState
from planner.merge_rules import Policy
from planner.potential_field import FieldParams
from planner.sigmoid_planner import PlannerSettings
from vehicle.model import MAX_DT, VehicleParams

DEFAULT_DT = 0.02
STEP_TOLERANCE = 1e-6
ROLES = ("ego", "obstacle")


class ConfigValidationError(ValueError):
    """Carries every offending field as ``"dotted.field: reason"``."""

    def __init__(self, errors: list[str]) -> None:
        self.errors = errors
        super().__init__("invalid scenario:\n  " + "\n  ".join(errors))


@dataclass(frozen=True, slots=True)
class ChannelConfig:
    delay: float = 0.1
    drop_probability: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delay) and self.delay >= 0):
            msg = f"delay must be >= 0, got {self.delay}"
            raise ParameterError(msg)
        if not 0.0 <= self.drop_probability <= 1.0:
            msg = f"drop_probability must lie in [0, 1], got {self.drop_probability}"
            raise ParameterError(msg)


@dataclass(frozen=True, slots=True)
class ScenarioEvent:
    t: float
    despawn: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class VehicleConfig:
    vid: str
    role: str
    initial: VehicleState
    params: VehicleParams
    policy: Policy
    cruise_speed: float

    @property
    def is_ego(self) -> bool:
        return self.role == "ego"


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    name: str
    duration: float
    dt: float
    lane: LaneGeometry
    vehicles: tuple[VehicleConfig, ...]
    merge: MergeParams = field(default_factory=MergeParams)
    field_params: FieldParams = field(default_factory=FieldParams)
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    coop_enabled: bool = False
    events: tuple[ScenarioEvent, ...] = ()
    description: str = ""

    @property
    def ego(self) -> VehicleConfig:
        return next(v for v in self.vehicles if v.is_ego)

    @property
    def obstacles(self) -> tuple[VehicleConfig, ...]:
        return tuple(v for v in self.vehicles if not v.is_ego)

    @property
    def steps(self) -> int:
        return round(self.duration / self.dt)


_TOP_LEVEL_KEYS = {
    "name",
    "description",
    "duration",
    "dt",
    "coop_enabled",
    "lane",
    "merge",
    "field",
    "planner",
    "channel",
    "vehicles",
    "events",
}
_VEHICLE_KEYS = {
    "id",
    "role",
    "x",
    "y",
    "heading",
    "speed",
    "length",
    "width",
    "policy",
    "cruise_speed",
    "vehicle",
    "rss",
}


class _Collector:
    def __init__(self) -> None:
        self.errors: list[str] = []

    def add(self, path: str, reason: str) -> None:
        self.errors.append(f"{path}: {reason}")

    def unknown_keys(self, data: dict[str, Any], allowed: set[str], path: str) -> None:
        for key in sorted(set(data) - allowed):
            self.add(_join(path, key), "unknown key")

    def number(self, data: dict[str, Any], key: str, path: str, default: float | None = None) -> float | None:
        value = data.get(key, default)
        if value is None:
            self.add(_join(path, key), "is required")
            return None
        if isinstance(value, bool) or not isinstance(value, int | float):
            self.add(_join(path, key), f"must be a number, got {value!r}")
            return None
        if not math.isfinite(value):
            self.add(_join(path, key), "must be finite")
            return None
        return float(value)

    def block(self, cls: type, data: Any, path: str, **extra: Any) -> Any:
        """Build a parameter dataclass from ``data``; field defaults fill missing keys."""
        if data is None:
            data = {}
        if not isinstance(data, dict):
            self.add(path, "must be an object")
            return None
        names = {f.name for f in dataclasses.fields(cls)} - set(extra)
        self.unknown_keys(data, names, path)
        kwargs: dict[str, Any] = dict(extra)
        ok = True
        for f in dataclasses.fields(cls):
            if f.name not in data or f.name in extra:
                continue
            value = data[f.name]
            if isinstance(value, list):
                value = tuple(value)
            if isinstance(value, tuple):
                if not all(_is_number(v) for v in value):
                    self.add(_join(path, f.name), "must be a list of numbers")
                    ok = False
                    continue
                value = tuple(float(v) for v in value)
            elif f.type in {"int", int}:
                if isinstance(value, bool) or not isinstance(value, int):
                    self.add(_join(path, f.name), f"must be an integer, got {value!r}")
                    ok = False
                    continue
            elif not _is_number(value):
                self.add(_join(path, f.name), f"must be a number, got {value!r}")
                ok = False
                continue
            else:
                value = float(value)
            kwargs[f.name] = value
        if not ok:
            return None
        try:
            return cls(**kwargs)
        except ParameterError as e:
            self.add(path, str(e))
            return None


def _is_number(value: Any) -> bool:
    return isinstance(value, int | float) and not isinstance(value, bool) and math.isfinite(value)


def _join(path: str, key: str | int) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def validate_scenario(document: dict[str, Any]) -> ScenarioConfig:
    """
    Validate a raw scenario document.

    Args:
        document: Parsed JSON/YAML object.

    Returns
    -------
        ScenarioConfig: The typed, validated scenario.

    Raises
    ------
        ConfigValidationError: Listing every offending field.
    """
    c = _Collector()
    if not isinstance(document, dict):
        raise ConfigValidationError(["<root>: must be an object"])
    c.unknown_keys(document, _TOP_LEVEL_KEYS, "")

    name = document.get("name")
    if not isinstance(name, str) or not name:
        c.add("name", "must be a non-empty string")
    description = document.get("description", "")
    if not isinstance(description, str):
        c.add("description", "must be a string")

    duration = c.number(document, "duration", "")
    dt = c.number(document, "dt", "", DEFAULT_DT)
    if dt is not None and not 0 < dt <= MAX_DT:
        c.add("dt", f"must lie in (0, {MAX_DT}], got {dt}")
        dt = None
    if duration is not None and duration <= 0:
        c.add("duration", f"must be > 0, got {duration}")
        duration = None
    if duration is not None and dt is not None:
        steps = duration / dt
        if abs(steps - round(steps)) > STEP_TOLERANCE:
            c.add("duration", f"must be an integral number of dt steps, got {duration} / {dt}")

    coop_enabled = document.get("coop_enabled", False)
    if not isinstance(coop_enabled, bool):
        c.add("coop_enabled", "must be true or false")

    lane = c.block(LaneGeometry, document.get("lane"), "lane")
    merge = c.block(MergeParams, document.get("merge"), "merge")
    field_params = c.block(FieldParams, document.get("field"), "field")
    planner = c.block(PlannerSettings, document.get("planner"), "planner")
    channel = c.block(ChannelConfig, document.get("channel"), "channel")

    vehicles = _vehicles(c, document.get("vehicles"), lane)
    events = _events(c, document.get("events", []), {v.vid for v in vehicles})

    if c.errors:
        raise ConfigValidationError(c.errors)
    return ScenarioConfig(
        name=name,
        description=description,
        duration=duration,
        dt=dt,
        lane=lane,
        vehicles=tuple(vehicles),
        merge=merge,
        field_params=field_params,
        planner=planner,
        channel=channel,
        coop_enabled=coop_enabled,
        events=tuple(events),
    )


def _vehicles(c: _Collector, data: Any, lane: LaneGeometry | None) -> list[VehicleConfig]:
    if not isinstance(data, list) or not data:
        c.add("vehicles", "must be a non-empty list")
        return []
    vehicles: list[VehicleConfig] = []
    seen: set[str] = set()
    egos = 0
    for i, raw in enumerate(data):
        path = _join("vehicles", i)
        if not isinstance(raw, dict):
            c.add(path, "must be an object")
            continue
        c.unknown_keys(raw, _VEHICLE_KEYS, path)
        vid = raw.get("id")
        if not isinstance(vid, str) or not vid:
            c.add(_join(path, "id"), "must be a non-empty string")
            continue
        if vid in seen:
            c.add(_join(path, "id"), f"duplicate id {vid!r}")
        seen.add(vid)
        role = raw.get("role", "obstacle")
        if role not in ROLES:
            c.add(_join(path, "role"), f"must be one of {', '.join(ROLES)}, got {role!r}")
            continue
        egos += role == "ego"
        try:
            policy = Policy(raw.get("policy", Policy.NON_COOPERATIVE))
        except ValueError:
            c.add(_join(path, "policy"), f"must be one of {', '.join(p.value for p in Policy)}")
            continue

        x = c.number(raw, "x", path)
        y = c.number(raw, "y", path)
        heading = c.number(raw, "heading", path, 0.0)
        speed = c.number(raw, "speed", path)
        length = c.number(raw, "length", path, 4.6)
        width = c.number(raw, "width", path, 1.8)
        cruise = c.number(raw, "cruise_speed", path, speed if speed is not None else 0.0)
        rss = c.block(RssParams, raw.get("rss"), _join(path, "rss"))
        params = None
        if rss is not None:
            params = c.block(VehicleParams, raw.get("vehicle"), _join(path, "vehicle"), rss=rss)
        values = (x, y, heading, speed, length, width, cruise)
        if params is None or any(v is None for v in values):
            continue
        if cruise is not None and not 0 <= cruise <= params.v_max:
            c.add(_join(path, "cruise_speed"), f"must lie in [0, {params.v_max}], got {cruise}")
            continue
        try:
            initial = VehicleState(
                x=x, y=y, heading=heading, speed_long=speed, length=length, width=width, vid=vid
            )
        except ParameterError as e:
            c.add(path, str(e))
            continue
        if lane is not None and role == "obstacle" and not lane.in_main_lane(y):
            c.add(_join(path, "y"), f"obstacle must start in the main lane (center {lane.main_center})")
        if lane is not None and role == "ego" and lane.in_main_lane(y):
            c.add(_join(path, "y"), f"ego must start in the side lane (center {lane.side_center})")
        vehicles.append(
            VehicleConfig(vid=vid, role=role, initial=initial, params=params, policy=policy, cruise_speed=cruise)
        )
    if egos != 1:
        c.add("vehicles", f"exactly one vehicle must have role 'ego', found {egos}")
    return vehicles


def _events(c: _Collector, data: Any, ids: set[str]) -> list[ScenarioEvent]:
    if not isinstance(data, list):
        c.add("events", "must be a list")
        return []
    events = []
    for i, raw in enumerate(data):
        path = _join("events", i)
        if not isinstance(raw, dict):
            c.add(path, "must be an object")
            continue
        c.unknown_keys(raw, {"t", "despawn"}, path)
        t = c.number(raw, "t", path)
        despawn = raw.get("despawn", [])
        if not isinstance(despawn, list) or not all(isinstance(v, str) for v in despawn):
            c.add(_join(path, "despawn"), "must be a list of vehicle ids")
            continue
        for vid in despawn:
            if vid not in ids:
                c.add(_join(path, "despawn"), f"unknown vehicle id {vid!r}")
        if t is not None:
            events.append(ScenarioEvent(t=t, despawn=tuple(despawn)))
    return sorted(events, key=lambda e: e.t)
