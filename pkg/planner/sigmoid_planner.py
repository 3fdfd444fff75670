"""Sigmoid lane-merge paths, crossing-point constraints and crossing-point selection."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from planner.domain import LaneGeometry, ParameterError, VehicleState, require_finite
from planner.potential_field import FieldParams, Scene, total_potential
from planner.rss import required_gap

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from planner.domain import RssParams

KAPPA_MIN = 0.05
KAPPA_MAX = 1.0
# Lateral progress of 1% of W marks where a path starts to leave its lane.
ENTRY_FRACTION = 0.01
TAIL_SPAN = 10.0
TIE_TOLERANCE = 1e-9
MIN_PLANNING_SPEED = 0.1


class CpInfeasibleError(RuntimeError):
    """Raised when no crossing point satisfies the RSS constraints: the merge must be aborted."""


@dataclass(frozen=True, slots=True, eq=False)
class SigmoidPath:
    w: float
    kappa: float
    p_c: float
    b: float
    waypoints: NDArray[np.float64] = field(repr=False)

    @property
    def xs(self) -> NDArray[np.float64]:
        return self.waypoints[:, 0]

    @property
    def ys(self) -> NDArray[np.float64]:
        return self.waypoints[:, 1]

    @property
    def headings(self) -> NDArray[np.float64]:
        return self.waypoints[:, 2]


@dataclass(frozen=True, slots=True)
class CpInterval:
    lower: float | None
    upper: float
    feasible: bool


@dataclass(frozen=True, slots=True)
class PlannerSettings:
    a_lat_comfort: float = 1.5
    grid_step: float = 0.5
    spacing: float = 1.0
    search_span: float = 300.0

    def __post_init__(self) -> None:
        if min(self.a_lat_comfort, self.grid_step, self.spacing, self.search_span) <= 0:
            msg = "planner settings must all be > 0"
            raise ParameterError(msg)


@dataclass(frozen=True, slots=True, eq=False)
class CrossingPlan:
    """Crossing-point candidates that satisfy the RSS constraints at the ego's projected arrival time."""

    kappa: float
    floor: float
    ceiling: float
    candidates: NDArray[np.float64] = field(repr=False)

    @property
    def feasible(self) -> bool:
        return self.candidates.size > 0

    @property
    def interval(self) -> CpInterval:
        if not self.feasible:
            return CpInterval(lower=self.floor, upper=self.ceiling, feasible=False)
        return CpInterval(lower=float(self.candidates[0]), upper=float(self.candidates[-1]), feasible=True)


def sigmoid_lateral(x: ArrayLike, path: SigmoidPath) -> NDArray[np.float64] | float:
    values = path.w / (1.0 + np.exp(-path.kappa * (np.asarray(x, dtype=float) - path.p_c))) + path.b
    return float(values) if np.ndim(values) == 0 else values


def _sigmoid(x: NDArray[np.float64], w: float, kappa: float, p_c: ArrayLike, b: float) -> NDArray[np.float64]:
    return w / (1.0 + np.exp(-kappa * (x - p_c))) + b


def _sigmoid_slope(x: NDArray[np.float64], w: float, kappa: float, p_c: float) -> NDArray[np.float64]:
    s = 1.0 / (1.0 + np.exp(-kappa * (x - p_c)))
    return w * kappa * s * (1.0 - s)


def select_kappa(v_ego: float, w: float, a_lat_comfort: float) -> float:
    """
    Midpoint slope that keeps the path's peak lateral acceleration at ``a_lat_comfort``.

    The sigmoid's largest |f''| is kappa^2 * |w| / (6 * sqrt(3)); multiplied by v^2 it is set equal to the
    comfort bound and solved for kappa.
    """
    if v_ego <= 0 or w == 0 or a_lat_comfort <= 0:
        msg = f"select_kappa needs positive inputs, got v={v_ego}, w={w}, a_lat={a_lat_comfort}"
        raise ParameterError(msg)
    kappa = math.sqrt(6 * math.sqrt(3) * a_lat_comfort / (abs(w) * v_ego**2))
    return min(max(kappa, KAPPA_MIN), KAPPA_MAX)


def entry_distance(kappa: float) -> float:
    """Distance before P_c at which the sigmoid has covered ENTRY_FRACTION of its offset."""
    return math.log(1 / ENTRY_FRACTION - 1) / kappa


def generate_path(  # noqa: PLR0913
    ego: VehicleState,
    w: float,
    kappa: float,
    p_c: float,
    b: float,
    horizon: float,
    spacing: float = 1.0,
) -> SigmoidPath:
    if spacing <= 0 or horizon < 0:
        msg = f"spacing must be > 0 and horizon >= 0, got {spacing}, {horizon}"
        raise ParameterError(msg)
    require_finite(w=w, kappa=kappa, p_c=p_c, b=b)
    count = int(math.floor(horizon / spacing + 1e-9)) + 1
    xs = ego.x + spacing * np.arange(count, dtype=float)
    ys = _sigmoid(xs, w, kappa, p_c, b)
    headings = np.arctan(_sigmoid_slope(xs, w, kappa, p_c))
    return SigmoidPath(w=w, kappa=kappa, p_c=p_c, b=b, waypoints=np.column_stack([xs, ys, headings]))


def straight_path(x0: float, y: float, horizon: float, spacing: float = 1.0) -> SigmoidPath:
    """Lane-keeping path: a sigmoid with zero offset."""
    start = VehicleState(x=x0, y=y)
    return generate_path(start, 0.0, KAPPA_MIN, x0, y, horizon, spacing)


def _crossing_bounds(
    x_follower: ArrayLike | None,
    d_rss_star: float,
    x_leader: ArrayLike | None,
    d_rss_next: float,
) -> tuple[NDArray[np.float64] | None, NDArray[np.float64] | None]:
    lower = None if x_follower is None else np.asarray(x_follower, dtype=float) + d_rss_star
    upper = None if x_leader is None else np.asarray(x_leader, dtype=float) - d_rss_next
    return lower, upper


def cp_feasible_interval(  # noqa: PLR0913
    ego: VehicleState,
    obstacles: list[VehicleState] | tuple[VehicleState, ...],
    gap_index: int,
    d_rss_lead: float | None = None,
    d_rss_star: float | None = None,
    d_rss_next: float | None = None,
    *,
    floor: float | None = None,
    ceiling: float = math.inf,
) -> CpInterval:
    """
    Admissible crossing points for the gap between ``obstacles[gap_index - 1]`` and ``obstacles[gap_index]``.

    Distances are center separations. Without a follower the interval starts at ``floor`` (the ego's
    position unless given); without a leader it ends at ``ceiling``. When the gap has no follower the
    leader's distance is ``d_rss_lead``, otherwise ``d_rss_next``.
    """
    if any(b.x < a.x for a, b in zip(obstacles, obstacles[1:], strict=False)):
        msg = "obstacles must be sorted by x ascending"
        raise ParameterError(msg)
    if not 0 <= gap_index <= len(obstacles):
        msg = f"gap_index {gap_index} out of range for {len(obstacles)} obstacles"
        raise ParameterError(msg)
    follower = obstacles[gap_index - 1] if gap_index > 0 else None
    leader = obstacles[gap_index] if gap_index < len(obstacles) else None
    lead_distance = d_rss_lead if follower is None else d_rss_next

    lower_arr, upper_arr = _crossing_bounds(
        None if follower is None else follower.x,
        d_rss_star or 0.0,
        None if leader is None else leader.x,
        lead_distance or 0.0,
    )
    base = ego.x if floor is None else floor
    lower = None if lower_arr is None else float(lower_arr)
    upper = ceiling if upper_arr is None else min(float(upper_arr), ceiling)
    start = base if lower is None else max(lower, base)
    return CpInterval(lower=lower, upper=upper, feasible=start <= upper)


def arrival_times(  # noqa: PLR0913
    distance: ArrayLike,
    v0: float,
    v_target: float,
    accel: float,
    decel: float,
) -> NDArray[np.float64]:
    """Time to cover ``distance`` when ramping from ``v0`` to ``v_target`` at constant rate, then cruising."""
    d = np.asarray(distance, dtype=float)
    rate = accel if v_target >= v0 else -decel
    t_ramp = abs(v_target - v0) / abs(rate) if v_target != v0 else 0.0
    d_ramp = (v0 + v_target) / 2 * t_ramp
    with np.errstate(invalid="ignore", divide="ignore"):
        if t_ramp > 0:
            disc = np.maximum(v0**2 + 2 * rate * d, 0.0)
            t_in_ramp = (np.sqrt(disc) - v0) / rate
        else:
            t_in_ramp = np.zeros_like(d)
        t_after = t_ramp + (d - d_ramp) / v_target if v_target > 0 else np.full_like(d, np.inf)
    return np.where(d <= d_ramp, t_in_ramp, t_after)


def plan_crossing(  # noqa: PLR0913
    ego: VehicleState,
    v_star: float,
    follower: VehicleState | None,
    leader: VehicleState | None,
    rss_params: Mapping[str, RssParams],
    rho_m: float,
    lane: LaneGeometry,
    settings: PlannerSettings,
    fixed: float | None = None,
) -> CrossingPlan:
    """
    Crossing-point candidates for merging at ``v_star`` between ``follower`` and ``leader``.

    Each candidate is checked against the RSS bounds at the ego's arrival time there: the follower may
    accelerate at its limit for half the merge threshold time, the leader holds its speed. A ``fixed``
    crossing point (the one of a path already being driven) is checked alone, without the entry floor.
    """
    ego_params = rss_params[ego.vid]
    kappa = select_kappa(max(v_star, MIN_PLANNING_SPEED), lane.lane_offset, settings.a_lat_comfort)
    floor = ego.x + entry_distance(kappa)
    ceiling = min(lane.side_lane_end_x, floor + settings.search_span)
    if fixed is not None:
        candidates = np.array([max(fixed, ego.x)]) if fixed <= lane.side_lane_end_x else np.empty(0)
    elif floor > ceiling:
        return CrossingPlan(kappa=kappa, floor=floor, ceiling=ceiling, candidates=np.empty(0))
    else:
        candidates = np.arange(floor, ceiling + 1e-9, settings.grid_step)
    t = arrival_times(candidates - ego.x, ego.speed_long, v_star, ego_params.a_accel_max, ego_params.a_brake_min)

    x_follower = None
    d_star = 0.0
    if follower is not None:
        f_params = rss_params[follower.vid]
        tau = rho_m / 2
        a_f = f_params.a_accel_max
        t_acc = np.minimum(t, tau)
        x_follower = follower.x + follower.speed_long * t + 0.5 * a_f * t_acc**2
        x_follower = x_follower + a_f * tau * np.maximum(t - tau, 0.0)
        v_follower = follower.speed_long + a_f * tau
        d_star = required_gap(follower, ego, f_params, ego_params, v_rear=v_follower, v_front=v_star)

    x_leader = None
    d_next = 0.0
    if leader is not None:
        x_leader = leader.x + leader.speed_long * t
        d_next = required_gap(ego, leader, ego_params, rss_params[leader.vid], v_rear=v_star)

    lower, upper = _crossing_bounds(x_follower, d_star, x_leader, d_next)
    mask = np.isfinite(t)
    if lower is not None:
        mask &= lower <= candidates
    if upper is not None:
        mask &= candidates <= upper
    return CrossingPlan(kappa=kappa, floor=floor, ceiling=ceiling, candidates=candidates[mask])


def select_cp(  # noqa: PLR0913
    interval: CpInterval,
    ego: VehicleState,
    scene: Scene,
    params: FieldParams,
    grid_step: float = 0.5,
    *,
    kappa: float,
    w: float,
    b: float,
    spacing: float = 1.0,
    candidates: ArrayLike | None = None,
    ego_speed: float | None = None,
) -> float:
    """
    Crossing point whose sigmoid accumulates the least potential along its waypoints.

    All candidates are integrated over the same longitudinal window. With ``ego_speed`` given, obstacles
    are advanced to the ego's arrival time at each waypoint. Near-ties go to the candidate closest to
    the middle of the candidate range.

    Raises
    ------
        CpInfeasibleError: When the interval is infeasible or no candidate is left.
    """
    if not interval.feasible:
        msg = "crossing-point interval is infeasible"
        raise CpInfeasibleError(msg)
    if candidates is None:
        start = ego.x if interval.lower is None else interval.lower
        grid = np.arange(start, interval.upper + 1e-9, grid_step)
        if grid.size == 0 or grid[-1] < interval.upper - 1e-9:
            grid = np.append(grid, interval.upper)
    else:
        grid = np.asarray(candidates, dtype=float)
    if grid.size == 0:
        msg = "no crossing-point candidates"
        raise CpInfeasibleError(msg)
    if grid.size == 1:
        return float(grid[0])

    end = float(grid.max()) + TAIL_SPAN / kappa
    count = int(math.floor((end - ego.x) / spacing)) + 1
    xs = ego.x + spacing * np.arange(count, dtype=float)
    ys = _sigmoid(xs[np.newaxis, :], w, kappa, grid[:, np.newaxis], b)
    t = None
    if ego_speed is not None:
        t = np.broadcast_to((xs - ego.x) / max(ego_speed, MIN_PLANNING_SPEED), ys.shape)
    xs_2d = np.broadcast_to(xs, ys.shape)
    costs = np.asarray(total_potential((xs_2d, ys), scene, params, t=t), dtype=float).sum(axis=1) * spacing

    best = float(costs.min())
    near = np.flatnonzero(costs <= best + TIE_TOLERANCE * max(abs(best), 1.0))
    midpoint = (float(grid.min()) + float(grid.max())) / 2
    choice = near[np.argmin(np.abs(grid[near] - midpoint))]
    return float(grid[choice])
