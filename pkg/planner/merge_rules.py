"""Merge rules: speed-constraint solvers, the merge decision state machine and obstacle responses."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import Any

from scipy.optimize import brentq

from planner.domain import (
    LaneGeometry,
    MergeParams,
    ParameterError,
    PreconditionError,
    RssParams,
    VehicleState,
    require_finite,
)
from planner.rss import required_gap
from planner.sigmoid_planner import entry_distance, select_kappa

TIME_EPS = 1e-9
SPEED_SEARCH_LIMIT = 200.0
RESTART_SPEED_STEP = 0.5
RESTART_SPEED_MIN = 0.5


class Mode(StrEnum):
    LANE_KEEP = "LaneKeep"
    MERGE_NON_COOP = "MergeNonCoop"
    NEGOTIATE_COOP = "NegotiateCoop"
    MERGE_COOP = "MergeCoop"
    HALT = "Halt"
    ABORT = "Abort"


class Request(StrEnum):
    SLOW_DOWN = "SlowDown"
    SPEED_UP = "SpeedUp"


class Policy(StrEnum):
    COOPERATIVE = "Cooperative"
    NON_COOPERATIVE = "NonCooperative"
    SILENT = "Silent"


class ResponseKind(StrEnum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    NO_REPLY = "NoReply"


class NegotiationStatus(StrEnum):
    IDLE = "idle"
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


MERGING_MODES = frozenset({Mode.MERGE_NON_COOP, Mode.MERGE_COOP})


@dataclass(frozen=True, slots=True)
class CoopMessage:
    sender_id: str
    receiver_id: str
    p_c: float
    d_rss_star: float
    request: Request
    timestamp: float
    sender_x: float = 0.0
    sender_speed: float = 0.0
    sender_brake_min: float = 0.0

    def __post_init__(self) -> None:
        require_finite(p_c=self.p_c, d_rss_star=self.d_rss_star, timestamp=self.timestamp)
        if self.d_rss_star < 0:
            msg = f"d_rss_star must be >= 0, got {self.d_rss_star}"
            raise ParameterError(msg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sender_id": self.sender_id,
            "receiver_id": self.receiver_id,
            "p_c": self.p_c,
            "d_rss_star": self.d_rss_star,
            "request": str(self.request),
            "timestamp": self.timestamp,
            "sender_x": self.sender_x,
            "sender_speed": self.sender_speed,
            "sender_brake_min": self.sender_brake_min,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CoopMessage:
        return cls(
            sender_id=str(data["sender_id"]),
            receiver_id=str(data["receiver_id"]),
            p_c=float(data["p_c"]),
            d_rss_star=float(data["d_rss_star"]),
            request=Request(data["request"]),
            timestamp=float(data["timestamp"]),
            sender_x=float(data.get("sender_x", 0.0)),
            sender_speed=float(data.get("sender_speed", 0.0)),
            sender_brake_min=float(data.get("sender_brake_min", 0.0)),
        )


@dataclass(frozen=True, slots=True)
class CoopReply:
    sender_id: str
    receiver_id: str
    kind: ResponseKind
    v_obs_star: float | None
    timestamp: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "sender_id": self.sender_id,
            "receiver_id": self.receiver_id,
            "reply": str(self.kind),
            "v_obs_star": self.v_obs_star,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True, slots=True)
class CoopResponse:
    kind: ResponseKind
    v_obs_star: float | None = None
    accel_limit: float | None = None


@dataclass(frozen=True, slots=True)
class MergeDecision:
    mode: Mode
    target_gap: int | None = None
    v_ego_star: float | None = None
    v_obs_star: float | None = None
    cp_hint: float | None = None
    message: CoopMessage | None = None
    follower_id: str | None = None
    leader_id: str | None = None

    def __post_init__(self) -> None:
        if self.mode is Mode.MERGE_NON_COOP and self.v_ego_star is None:
            msg = "MergeNonCoop requires v_ego_star"
            raise ParameterError(msg)
        if self.mode in {Mode.MERGE_COOP, Mode.NEGOTIATE_COOP} and self.v_obs_star is None and self.cp_hint is None:
            msg = f"{self.mode} requires v_obs_star or cp_hint"
            raise ParameterError(msg)
        if self.mode in {Mode.HALT, Mode.ABORT} and (self.v_ego_star is not None or self.v_obs_star is not None):
            msg = f"{self.mode} carries no speed fields"
            raise ParameterError(msg)

    @property
    def gap_key(self) -> tuple[str | None, str | None]:
        return self.follower_id, self.leader_id


@dataclass(frozen=True, slots=True)
class MergeContext:
    """Negotiation and commitment record carried between decisions; the caller owns its updates."""

    v_cruise: float
    status: NegotiationStatus = NegotiationStatus.IDLE
    first_sent: float | None = None
    target_id: str | None = None
    request: Request | None = None
    coop_follower_id: str | None = None
    coop_leader_id: str | None = None
    p_c: float | None = None
    d_rss_star: float | None = None
    v_obs_star: float | None = None
    v_start: float | None = None
    committed_mode: Mode | None = None
    committed_follower_id: str | None = None
    committed_leader_id: str | None = None
    infeasible_since: float | None = None
    halted: bool = False

    def coop_ego_speed(self, a_brake_min: float, rho_c: float) -> float:
        """Speed the ego holds while cooperating: unchanged ahead, reduced by a_brake_min over rho_c behind."""
        v_start = self.v_cruise if self.v_start is None else self.v_start
        if self.request is Request.SPEED_UP:
            return max(v_start - a_brake_min * rho_c, 0.0)
        return v_start


@dataclass(frozen=True, slots=True)
class Gap:
    """Gap ``index`` lies between ``obstacles[index - 1]`` (follower) and ``obstacles[index]`` (leader)."""

    index: int
    follower: VehicleState | None
    leader: VehicleState | None

    @property
    def key(self) -> tuple[str | None, str | None]:
        return (
            self.follower.vid if self.follower is not None else None,
            self.leader.vid if self.leader is not None else None,
        )


@dataclass(frozen=True, slots=True)
class SpeedWindow:
    lo: float
    hi: float

    def clipped(self, v_cap: float) -> tuple[float, float]:
        return max(self.lo, 0.0), min(self.hi, v_cap)

    def is_feasible(self, v_cap: float) -> bool:
        lo, hi = self.clipped(v_cap)
        return lo <= hi

    def admits(self, v: float, tolerance: float) -> bool:
        return self.lo - tolerance <= v <= self.hi + tolerance


CpCheck = Callable[[Gap, float], bool]


def noncoop_min_speed_ahead(  # noqa: PLR0913
    x_ego: float,
    x_obs: float,
    v_obs: float,
    a_obs_accel_max: float,
    rho_m: float,
    d_rss: float,
) -> float:
    """Smallest ego speed that keeps the follower ``d_rss`` behind over half the merge threshold time."""
    _require_positive(rho_m=rho_m)
    return (2 / rho_m) * (x_obs - x_ego + v_obs * rho_m / 2 + a_obs_accel_max * rho_m**2 / 8 + d_rss)


def noncoop_max_speed_behind(x_ego: float, x_obs: float, v_obs: float, rho_m: float, d_rss: float) -> float:
    """Largest ego speed that stays ``d_rss`` behind the leader over the merge threshold time."""
    _require_positive(rho_m=rho_m)
    return v_obs + (x_obs - x_ego - d_rss) / rho_m


def coop_max_obstacle_speed_ego_ahead(  # noqa: PLR0913
    x_obs: float,
    v_obs: float,
    p_c: float,
    d_rss_star: float,
    rho_c: float,
    rho_m: float,
) -> float:
    """Highest speed the follower may settle at so the ego can cross at ``p_c`` ahead of it."""
    _require_positive(rho_c=rho_c, rho_m=rho_m)
    return (p_c - d_rss_star - x_obs - v_obs * rho_c / 2) / (rho_c / 2 + rho_m / 2)


def coop_min_obstacle_speed_ego_behind(  # noqa: PLR0913
    x_ego: float,
    v_ego: float,
    x_obs: float,
    v_obs: float,
    a_ego_brake_min: float,
    rho_c: float,
    d_rss: float,
) -> float:
    """Lowest speed the leader must reach so the braking ego ends up ``d_rss`` behind it."""
    _require_positive(rho_c=rho_c)
    return (2 / rho_c) * (x_ego - x_obs + v_ego * rho_c - a_ego_brake_min * rho_c**2 / 2 + d_rss) - v_obs


def enumerate_gaps(obstacles: Sequence[VehicleState]) -> list[Gap]:
    gaps = []
    for index in range(len(obstacles) + 1):
        follower = obstacles[index - 1] if index > 0 else None
        leader = obstacles[index] if index < len(obstacles) else None
        gaps.append(Gap(index=index, follower=follower, leader=leader))
    return gaps


def speed_window(  # noqa: PLR0913
    ego: VehicleState,
    gap: Gap,
    params: MergeParams,
    rss_params: Mapping[str, RssParams],
    *,
    after_line: bool = False,
) -> SpeedWindow:
    """
    Ego speed bounds for merging into ``gap``, with each safe distance evaluated at the bound itself.

    The follower's safe distance shrinks as the ego speeds up and the leader's grows, so both bounds are
    the unique roots of monotone functions and are found by bracketing.
    """
    ego_params = rss_params[ego.vid]
    lo = 0.0
    hi = math.inf
    rho_m = params.rho_m

    follower = gap.follower
    if follower is not None and not after_line:
        f_params = rss_params[follower.vid]
        v_f_proj = follower.speed_long + f_params.a_accel_max * rho_m / 2

        def ahead_excess(v: float) -> float:
            d = required_gap(follower, ego, f_params, ego_params, v_rear=v_f_proj, v_front=v)
            return v - noncoop_min_speed_ahead(ego.x, follower.x, follower.speed_long, f_params.a_accel_max, rho_m, d)

        lo = _bracketed_root(ahead_excess, below=0.0, above=math.inf)

    leader = gap.leader
    if leader is not None:
        l_params = rss_params[leader.vid]

        def behind_excess(v: float) -> float:
            d = required_gap(ego, leader, ego_params, l_params, v_rear=v, v_front=leader.speed_long)
            return v - noncoop_max_speed_behind(ego.x, leader.x, leader.speed_long, rho_m, d)

        if behind_excess(0.0) > 0:
            d0 = required_gap(ego, leader, ego_params, l_params, v_rear=0.0)
            hi = noncoop_max_speed_behind(ego.x, leader.x, leader.speed_long, rho_m, d0)
        else:
            hi = _bracketed_root(behind_excess, below=0.0, above=math.inf)

    return SpeedWindow(lo=lo, hi=hi)


def _bracketed_root(func: Callable[[float], float], *, below: float, above: float) -> float:
    """Root of an increasing ``func`` on [0, SPEED_SEARCH_LIMIT]; ``below``/``above`` when it has no sign change."""
    f_low = func(0.0)
    if f_low >= 0:
        return below
    if func(SPEED_SEARCH_LIMIT) < 0:
        return above
    return float(brentq(func, 0.0, SPEED_SEARCH_LIMIT, xtol=1e-10, rtol=1e-12))


def decide(  # noqa: PLR0913
    ego: VehicleState,
    obstacles: Sequence[VehicleState],
    params: MergeParams,
    rss_params: Mapping[str, RssParams],
    lane: LaneGeometry,
    elapsed: float,
    coop_enabled: bool,
    context: MergeContext,
    *,
    v_max: float = 40.0,
    a_lat_comfort: float = 1.5,
    cp_check: CpCheck | None = None,
) -> MergeDecision:
    """
    Decide the ego's merge mode for one evaluation step.

    Args:
        ego: Ego state on the side lane.
        obstacles: Main-lane vehicles sorted by ``x``.
        params: Merge timing parameters.
        rss_params: RSS parameters keyed by vehicle id (ego included), with channel delay already folded in.
        lane: Road geometry.
        elapsed: Time since scenario start (s).
        coop_enabled: Whether the ego may negotiate over V2V.
        context: Negotiation and commitment record from the previous step.
        v_max: Ego top speed (m/s).
        a_lat_comfort: Lateral comfort bound used for the crossing-point floor of cooperative proposals.
        cp_check: Optional callback rejecting gaps without a crossing point before the side-lane end.

    Returns
    -------
        MergeDecision: The mode plus the speed and gap fields that mode requires.

    Raises
    ------
        PreconditionError: When ``obstacles`` are not sorted by ``x``.
    """
    if any(b.x < a.x for a, b in zip(obstacles, obstacles[1:], strict=False)):
        msg = "obstacles must be sorted by x ascending"
        raise PreconditionError(msg)

    if elapsed < params.t_m_dec - TIME_EPS:
        return MergeDecision(Mode.LANE_KEEP, v_ego_star=context.v_cruise)

    ego_params = rss_params[ego.vid]
    gaps = enumerate_gaps(obstacles)
    by_key = {gap.key: gap for gap in gaps}

    if context.committed_mode is not None and lane.in_main_lane(ego.y):
        return _continue_after_line(ego, obstacles, params, rss_params, context)

    if context.status is NegotiationStatus.ACCEPTED:
        coop_gap = by_key.get((context.coop_follower_id, context.coop_leader_id))
        if coop_gap is not None:
            return MergeDecision(
                Mode.MERGE_COOP,
                target_gap=coop_gap.index,
                v_ego_star=context.coop_ego_speed(ego_params.a_brake_min, params.rho_c),
                v_obs_star=context.v_obs_star,
                cp_hint=context.p_c,
                follower_id=context.coop_follower_id,
                leader_id=context.coop_leader_id,
            )

    v_ref = context.v_cruise if context.halted else ego.speed_long
    windows = {gap.index: speed_window(ego, gap, params, rss_params) for gap in gaps}

    if context.committed_mode is Mode.MERGE_NON_COOP:
        committed = by_key.get((context.committed_follower_id, context.committed_leader_id))
        if committed is not None:
            v_star = _feasible_speed(committed, windows[committed.index], v_ref, v_max, context, cp_check)
            if v_star is not None:
                return _merge_non_coop(committed, v_star)
        return MergeDecision(Mode.ABORT)

    feasible: list[tuple[Gap, float]] = []
    for gap in gaps:
        v_star = _feasible_speed(gap, windows[gap.index], v_ref, v_max, context, cp_check)
        if v_star is not None:
            feasible.append((gap, v_star))

    at_speed = [
        (gap, v) for gap, v in feasible if context.halted or windows[gap.index].admits(v_ref, params.speed_tolerance)
    ]
    # An at-speed gap wins even while a request is in flight, so a gap opened before the reply is taken at once.
    if at_speed:
        return _merge_non_coop(*_closest(at_speed, v_ref))

    if coop_enabled and not context.halted:
        negotiation = _negotiate(ego, gaps, windows, v_ref, params, rss_params, lane, elapsed, context, a_lat_comfort)
        if negotiation is not None:
            return negotiation

    if feasible:
        return _merge_non_coop(*_closest(feasible, v_ref))

    if context.halted:
        return MergeDecision(Mode.HALT)

    infeasible_for = 0.0 if context.infeasible_since is None else elapsed - context.infeasible_since
    remaining = lane.side_lane_end_x - ego.x
    stopping = ego.speed_long**2 / (2 * ego_params.a_brake_min)
    if infeasible_for >= params.halt_window - TIME_EPS and remaining < stopping + params.halt_margin:
        return MergeDecision(Mode.HALT)
    return MergeDecision(Mode.LANE_KEEP, v_ego_star=context.v_cruise)


def _feasible_speed(  # noqa: PLR0913
    gap: Gap,
    window: SpeedWindow,
    v_ref: float,
    v_max: float,
    context: MergeContext,
    cp_check: CpCheck | None,
) -> float | None:
    if not window.is_feasible(v_max):
        return None
    lo, hi = window.clipped(v_max)
    v_star = min(max(v_ref, lo), hi)
    if cp_check is None or cp_check(gap, v_star):
        return v_star
    if not context.halted:
        return None
    # From standstill, try slower restarts until the merge fits the remaining side lane.
    v = v_star - RESTART_SPEED_STEP
    while v >= max(lo, RESTART_SPEED_MIN):
        if cp_check(gap, v):
            return v
        v -= RESTART_SPEED_STEP
    return None


def _closest(candidates: list[tuple[Gap, float]], v_ref: float) -> tuple[Gap, float]:
    return min(candidates, key=lambda item: (abs(item[1] - v_ref), item[0].index))


def _merge_non_coop(gap: Gap, v_star: float) -> MergeDecision:
    follower_id, leader_id = gap.key
    return MergeDecision(
        Mode.MERGE_NON_COOP,
        target_gap=gap.index,
        v_ego_star=v_star,
        follower_id=follower_id,
        leader_id=leader_id,
    )


def _continue_after_line(
    ego: VehicleState,
    obstacles: Sequence[VehicleState],
    params: MergeParams,
    rss_params: Mapping[str, RssParams],
    context: MergeContext,
) -> MergeDecision:
    """Once past the lane line the merge is kept; only the leader still bounds the speed."""
    leader = next((o for o in obstacles if o.vid == context.committed_leader_id), None)
    index = next((i for i, o in enumerate(obstacles) if o.vid == context.committed_leader_id), len(obstacles))
    follower = obstacles[index - 1] if index > 0 else None
    gap = Gap(index=index, follower=follower, leader=leader)
    window = speed_window(ego, gap, params, rss_params, after_line=True)
    v_star = max(min(context.v_cruise, window.hi), 0.0)
    mode = context.committed_mode or Mode.MERGE_NON_COOP
    return MergeDecision(
        mode,
        target_gap=index,
        v_ego_star=v_star,
        v_obs_star=context.v_obs_star if mode is Mode.MERGE_COOP else None,
        cp_hint=context.p_c,
        follower_id=context.committed_follower_id,
        leader_id=context.committed_leader_id,
    )


def _negotiate(  # noqa: PLR0913
    ego: VehicleState,
    gaps: list[Gap],
    windows: Mapping[int, SpeedWindow],
    v_ref: float,
    params: MergeParams,
    rss_params: Mapping[str, RssParams],
    lane: LaneGeometry,
    elapsed: float,
    context: MergeContext,
    a_lat_comfort: float,
) -> MergeDecision | None:
    ego_params = rss_params[ego.vid]
    if context.status is NegotiationStatus.REJECTED:
        return None
    if context.status is NegotiationStatus.PENDING:
        first_sent = context.first_sent if context.first_sent is not None else elapsed
        if elapsed - first_sent >= params.rho_c - TIME_EPS:
            return None
        index = next((g.index for g in gaps if g.key == (context.coop_follower_id, context.coop_leader_id)), None)
        return MergeDecision(
            Mode.NEGOTIATE_COOP,
            target_gap=index,
            v_ego_star=context.coop_ego_speed(ego_params.a_brake_min, params.rho_c),
            cp_hint=context.p_c,
            follower_id=context.coop_follower_id,
            leader_id=context.coop_leader_id,
        )
    if context.status is not NegotiationStatus.IDLE:
        return None

    best: tuple[float, int, Gap, Request] | None = None
    for gap in gaps:
        window = windows[gap.index]
        options = []
        if gap.follower is not None and v_ref < window.lo:
            options.append((window.lo - v_ref, Request.SLOW_DOWN))
        if gap.leader is not None and v_ref > window.hi:
            options.append((v_ref - window.hi, Request.SPEED_UP))
        if not options:
            continue
        shift, request = max(options)
        if math.isfinite(shift) and (best is None or (shift, gap.index) < best[:2]):
            best = (shift, gap.index, gap, request)
    if best is None:
        return None

    _, _, gap, request = best
    rho_c, rho_m = params.rho_c, params.rho_m
    a_brake = ego_params.a_brake_min
    w = abs(lane.lane_offset)
    if request is Request.SLOW_DOWN:
        target = gap.follower
        assert target is not None  # noqa: S101
        v_cross = v_ref
        travel = v_ref * (rho_c + rho_m / 2)
        d_star = required_gap(target, ego, rss_params[target.vid], ego_params, v_front=v_ref)
    else:
        target = gap.leader
        assert target is not None  # noqa: S101
        v_cross = max(v_ref - a_brake * rho_c, 0.0)
        braking = v_ref * rho_c - a_brake * rho_c**2 / 2 if v_cross > 0 else v_ref**2 / (2 * a_brake)
        travel = braking + v_cross * rho_m / 2
        d_star = required_gap(ego, target, ego_params, rss_params[target.vid], v_rear=v_ref)

    floor = ego.x + entry_distance(select_kappa(max(v_cross, 0.1), w, a_lat_comfort))
    p_c = max(floor, ego.x + travel)
    message = CoopMessage(
        sender_id=ego.vid,
        receiver_id=target.vid,
        p_c=p_c,
        d_rss_star=d_star,
        request=request,
        timestamp=elapsed,
        sender_x=ego.x,
        sender_speed=ego.speed_long,
        sender_brake_min=a_brake,
    )
    follower_id, leader_id = gap.key
    return MergeDecision(
        Mode.NEGOTIATE_COOP,
        target_gap=gap.index,
        v_ego_star=v_cross if request is Request.SPEED_UP else v_ref,
        cp_hint=p_c,
        message=message,
        follower_id=follower_id,
        leader_id=leader_id,
    )


def obstacle_respond(  # noqa: PLR0913
    msg: CoopMessage,
    obstacle: VehicleState,
    policy: Policy,
    obstacle_params: RssParams,
    *,
    rho_c: float,
    rho_m: float,
    v_max: float = 40.0,
    now: float | None = None,
) -> CoopResponse:
    """
    Answer a cooperation request.

    A cooperative obstacle solves for the speed the request needs and accepts when it can reach that
    speed within ``rho_c`` without braking harder than ``a_brake_min`` or accelerating harder than
    ``a_accel_max``. The returned ``accel_limit`` is the constant rate that reaches it in exactly ``rho_c``.
    """
    if policy is Policy.SILENT:
        return CoopResponse(ResponseKind.NO_REPLY)
    if policy is Policy.NON_COOPERATIVE:
        return CoopResponse(ResponseKind.REJECT)

    v_obs = obstacle.speed_long
    if msg.request is Request.SLOW_DOWN:
        v_limit = coop_max_obstacle_speed_ego_ahead(obstacle.x, v_obs, msg.p_c, msg.d_rss_star, rho_c, rho_m)
        v_star = min(v_obs, v_limit)
        reachable = max(v_obs - obstacle_params.a_brake_min * rho_c, 0.0)
        if v_star < reachable - TIME_EPS or v_star < 0:
            return CoopResponse(ResponseKind.REJECT)
    else:
        elapsed = 0.0 if now is None else max(now - msg.timestamp, 0.0)
        x_ego = msg.sender_x + msg.sender_speed * elapsed
        v_needed = coop_min_obstacle_speed_ego_behind(
            x_ego, msg.sender_speed, obstacle.x, v_obs, msg.sender_brake_min, rho_c, msg.d_rss_star
        )
        v_star = max(v_obs, v_needed)
        reachable = min(v_obs + obstacle_params.a_accel_max * rho_c, v_max)
        if v_star > reachable + TIME_EPS:
            return CoopResponse(ResponseKind.REJECT)
    return CoopResponse(ResponseKind.ACCEPT, v_obs_star=v_star, accel_limit=abs(v_obs - v_star) / rho_c)


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            msg = f"{name} must be > 0, got {value}"
            raise ParameterError(msg)
