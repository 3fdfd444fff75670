"""Pure-pursuit steering and proportional speed control."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from planner.domain import ParameterError
from planner.merge_rules import Request

if TYPE_CHECKING:
    from planner.domain import VehicleState
    from planner.sigmoid_planner import SigmoidPath
    from vehicle.model import VehicleParams

LOOKAHEAD_GAIN = 0.5
LOOKAHEAD_MIN = 3.0
LOOKAHEAD_MAX = 15.0


def lookahead_distance(v: float) -> float:
    return min(max(LOOKAHEAD_GAIN * v, LOOKAHEAD_MIN), LOOKAHEAD_MAX)


def _lookahead_point(path: SigmoidPath, x: float, y: float, distance: float) -> tuple[float, float]:
    points = path.waypoints[:, :2]
    nearest = int(np.argmin(np.hypot(points[:, 0] - x, points[:, 1] - y)))
    tail = points[nearest:]
    if len(tail) > 1:
        seg = np.hypot(np.diff(tail[:, 0]), np.diff(tail[:, 1]))
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        if arc[-1] >= distance:
            i = int(np.searchsorted(arc, distance))
            frac = (distance - arc[i - 1]) / seg[i - 1] if seg[i - 1] > 0 else 0.0
            px, py = tail[i - 1] + frac * (tail[i] - tail[i - 1])
            return float(px), float(py)
        remaining = distance - arc[-1]
    else:
        remaining = distance
    # Past the last waypoint the path continues along its final heading.
    end_heading = float(path.waypoints[-1, 2])
    end_x, end_y = tail[-1]
    return float(end_x + remaining * math.cos(end_heading)), float(end_y + remaining * math.sin(end_heading))


def track_path(
    state: VehicleState,
    path: SigmoidPath,
    params: VehicleParams,
    lookahead: float | None = None,
) -> float:
    """Pure-pursuit steer (rad) toward the point ``lookahead`` metres along the path from the nearest waypoint."""
    if path.waypoints.size == 0:
        msg = "path has no waypoints"
        raise ParameterError(msg)
    distance = lookahead_distance(state.speed_long) if lookahead is None else lookahead
    px, py = _lookahead_point(path, state.x, state.y, distance)
    alpha = math.atan2(py - state.y, px - state.x) - state.heading
    chord = max(math.hypot(px - state.x, py - state.y), 1e-6)
    steer = math.atan2(2 * params.wheelbase * math.sin(alpha), chord)
    return min(max(steer, -params.max_steer), params.max_steer)


def speed_controller(  # noqa: PLR0913
    state: VehicleState,
    v_target: float,
    params: VehicleParams,
    *,
    response: Request | None = None,
    gain: float = 1.0,
    accel_limit: float | None = None,
) -> float:
    """
    Proportional speed law clamped to the vehicle's limits.

    A cooperative ``SlowDown`` brakes no harder than ``a_brake_min``; a ``SpeedUp`` accelerates no harder
    than ``a_accel_max``. ``accel_limit`` caps the magnitude further.
    """
    if v_target < 0:
        msg = f"v_target must be >= 0, got {v_target}"
        raise ParameterError(msg)
    rss = params.rss
    lower, upper = -rss.a_brake_max, rss.a_accel_max
    if response is Request.SLOW_DOWN:
        lower = -rss.a_brake_min
    if accel_limit is not None:
        lower, upper = max(lower, -accel_limit), min(upper, accel_limit)
    return min(max(gain * (v_target - state.speed_long), lower), upper)
