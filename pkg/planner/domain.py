"""Shared value types for the merge planner.

Global frame: X grows in the direction of travel, Y grows to the left, lanes run parallel to X.
Positions are vehicle geometric centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class ParameterError(ValueError):
    """Raised when a numeric input is non-finite or outside its documented range."""


class PreconditionError(ValueError):
    """Raised when a call contract is violated (ordering, step size, ...)."""


def require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            msg = f"{name} must be finite, got {value!r}"
            raise ParameterError(msg)


@dataclass(frozen=True, slots=True)
class VehicleState:
    x: float
    y: float
    heading: float = 0.0
    sideslip: float = 0.0
    yaw_rate: float = 0.0
    speed_long: float = 0.0
    speed_lat: float = 0.0
    length: float = 4.6
    width: float = 1.8
    vid: str = ""

    def __post_init__(self) -> None:
        require_finite(
            x=self.x,
            y=self.y,
            heading=self.heading,
            sideslip=self.sideslip,
            yaw_rate=self.yaw_rate,
            speed_long=self.speed_long,
            speed_lat=self.speed_lat,
        )
        if self.speed_long < 0:
            msg = f"speed_long must be >= 0, got {self.speed_long}"
            raise ParameterError(msg)
        if self.length <= 0 or self.width <= 0:
            msg = f"length and width must be > 0, got {self.length} x {self.width}"
            raise ParameterError(msg)
        if abs(self.sideslip) >= math.pi / 2:
            msg = f"|sideslip| must be < pi/2, got {self.sideslip}"
            raise ParameterError(msg)


@dataclass(frozen=True, slots=True)
class RssParams:
    t_lag: float = 0.2
    a_accel_max: float = 2.0
    a_brake_min: float = 6.0
    a_brake_max: float = 8.0
    a_accel_lat_max: float = 0.5
    a_brake_lat_min: float = 1.0
    mu: float = 0.1

    def __post_init__(self) -> None:
        require_finite(
            t_lag=self.t_lag,
            a_accel_max=self.a_accel_max,
            a_brake_min=self.a_brake_min,
            a_brake_max=self.a_brake_max,
            a_accel_lat_max=self.a_accel_lat_max,
            a_brake_lat_min=self.a_brake_lat_min,
            mu=self.mu,
        )
        if self.t_lag < 0 or self.mu < 0 or self.a_accel_lat_max < 0:
            msg = "t_lag, mu and a_accel_lat_max must be >= 0"
            raise ParameterError(msg)
        if min(self.a_accel_max, self.a_brake_min, self.a_brake_lat_min) <= 0:
            msg = "a_accel_max, a_brake_min and a_brake_lat_min must be > 0"
            raise ParameterError(msg)
        if self.a_brake_max < self.a_brake_min:
            msg = f"a_brake_max ({self.a_brake_max}) must be >= a_brake_min ({self.a_brake_min})"
            raise ParameterError(msg)

    def with_lag(self, extra: float) -> RssParams:
        """Return a copy whose retardation time also covers ``extra`` seconds (e.g. channel delay)."""
        return replace(self, t_lag=self.t_lag + extra)


@dataclass(frozen=True, slots=True)
class MergeParams:
    rho_m: float = 4.0
    rho_c: float = 1.0
    t_m_dec: float = 1.0
    halt_window: float = 1.0
    halt_margin: float = 5.0
    speed_tolerance: float = 0.5

    def __post_init__(self) -> None:
        require_finite(
            rho_m=self.rho_m,
            rho_c=self.rho_c,
            t_m_dec=self.t_m_dec,
            halt_window=self.halt_window,
            halt_margin=self.halt_margin,
            speed_tolerance=self.speed_tolerance,
        )
        if self.rho_m <= 0 or self.rho_c <= 0:
            msg = f"rho_m and rho_c must be > 0, got {self.rho_m}, {self.rho_c}"
            raise ParameterError(msg)
        if min(self.t_m_dec, self.halt_window, self.halt_margin, self.speed_tolerance) < 0:
            msg = "t_m_dec, halt_window, halt_margin and speed_tolerance must be >= 0"
            raise ParameterError(msg)


@dataclass(frozen=True, slots=True)
class LaneGeometry:
    y_left: float = 1.75
    y_right: float = -5.25
    lane_centers: tuple[float, ...] = (-3.5, 0.0)
    side_lane_end_x: float = 500.0
    side_lane: int = 0
    main_lane: int = 1

    def __post_init__(self) -> None:
        require_finite(y_left=self.y_left, y_right=self.y_right, side_lane_end_x=self.side_lane_end_x)
        centers = self.lane_centers
        if not centers:
            msg = "lane_centers must not be empty"
            raise ParameterError(msg)
        if any(b <= a for a, b in zip(centers, centers[1:], strict=False)):
            msg = f"lane_centers must be strictly increasing, got {centers}"
            raise ParameterError(msg)
        if not (self.y_right < centers[0] and centers[-1] < self.y_left):
            msg = f"lane centers {centers} must lie strictly between y_right={self.y_right} and y_left={self.y_left}"
            raise ParameterError(msg)
        for name, index in (("side_lane", self.side_lane), ("main_lane", self.main_lane)):
            if not 0 <= index < len(centers):
                msg = f"{name} index {index} out of range for {len(centers)} lanes"
                raise ParameterError(msg)
        if self.side_lane == self.main_lane:
            msg = "side_lane and main_lane must differ"
            raise ParameterError(msg)

    @property
    def side_center(self) -> float:
        return self.lane_centers[self.side_lane]

    @property
    def main_center(self) -> float:
        return self.lane_centers[self.main_lane]

    @property
    def lane_offset(self) -> float:
        """Signed W: target lane center minus origin lane center."""
        return self.main_center - self.side_center

    def in_main_lane(self, y: float) -> bool:
        """True once a center at ``y`` is past the line between the side and main lanes."""
        return abs(y - self.main_center) < abs(self.lane_offset) / 2


def positive_part(x: float) -> float:
    require_finite(x=x)
    return max(x, 0.0)


def bumper_gap(rear: VehicleState, front: VehicleState) -> float:
    """Distance between the rear vehicle's front bumper and the front vehicle's rear bumper (negative on overlap)."""
    return (front.x - rear.x) - (front.length + rear.length) / 2
