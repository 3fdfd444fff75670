"""Minimum longitudinal and lateral safe distances (extended RSS)."""

from __future__ import annotations

from dataclasses import dataclass

from planner.domain import ParameterError, RssParams, VehicleState, positive_part, require_finite


@dataclass(frozen=True, slots=True)
class SafeDistances:
    d_long: float
    d_lat: float

    def __post_init__(self) -> None:
        if self.d_long < 0 or self.d_lat < 0:
            msg = f"safe distances must be >= 0, got {self.d_long}, {self.d_lat}"
            raise ParameterError(msg)


def longitudinal_safe_distance(  # noqa: PLR0913
    v_ego: float,
    v_front: float,
    ego_params: RssParams,
    front_brake_max: float,
    l_ego: float,
    l_front: float,
) -> float:
    """
    Minimum longitudinal distance the rear (ego) vehicle owes the vehicle in front.

    Args:
        v_ego: Speed of the rear vehicle (m/s).
        v_front: Speed of the front vehicle (m/s).
        ego_params: RSS parameters of the rear vehicle.
        front_brake_max: Maximum braking capability of the front vehicle (m/s^2).
        l_ego: Rear vehicle length (m).
        l_front: Front vehicle length (m).

    Returns
    -------
        float: Non-negative distance in metres.

    Raises
    ------
        ParameterError: On non-finite inputs, negative speeds or non-positive braking parameters.
    """
    require_finite(v_ego=v_ego, v_front=v_front, front_brake_max=front_brake_max, l_ego=l_ego, l_front=l_front)
    if v_ego < 0 or v_front < 0:
        msg = f"speeds must be >= 0, got v_ego={v_ego}, v_front={v_front}"
        raise ParameterError(msg)
    if front_brake_max <= 0:
        msg = f"front_brake_max must be > 0, got {front_brake_max}"
        raise ParameterError(msg)

    t = ego_params.t_lag
    a_acc = ego_params.a_accel_max
    v_rho = v_ego + a_acc * t
    bracket = (
        v_ego * t
        + 0.5 * a_acc * t**2
        + (l_ego + l_front) / 2
        + v_rho**2 / (2 * ego_params.a_brake_min)
        - v_front**2 / (2 * front_brake_max)
    )
    return positive_part(bracket)


def lateral_safe_distance(  # noqa: PLR0913
    v_lat_ego: float,
    v_lat_other: float,
    ego_params: RssParams,
    other_params: RssParams,
    w_ego: float,
    w_other: float,
) -> float:
    """
    Minimum lateral distance between the ego and another vehicle.

    Lateral speeds are measured along the axis pointing from the ego toward the other vehicle, so a
    positive ``v_lat_ego`` and a negative ``v_lat_other`` both close the gap. Both vehicles are assumed
    to keep accelerating toward each other at their ``a_accel_lat_max`` for the ego's retardation time.
    """
    require_finite(v_lat_ego=v_lat_ego, v_lat_other=v_lat_other, w_ego=w_ego, w_other=w_other)
    if w_ego < 0 or w_other < 0:
        msg = f"widths must be >= 0, got {w_ego}, {w_other}"
        raise ParameterError(msg)

    t = ego_params.t_lag
    v_e_rho = v_lat_ego + ego_params.a_accel_lat_max * t
    v_o_rho = v_lat_other - other_params.a_accel_lat_max * t
    ego_term = (v_lat_ego + v_e_rho) / 2 * t + v_e_rho**2 / (2 * ego_params.a_brake_lat_min)
    other_term = (v_lat_other + v_o_rho) / 2 * t + v_o_rho**2 / (2 * other_params.a_brake_lat_min)
    return ego_params.mu + positive_part(ego_term + (w_ego + w_other) / 2 - other_term)


def lateral_closing_speeds(ego: VehicleState, other: VehicleState) -> tuple[float, float]:
    """Project both lateral speeds on the ego-to-other axis."""
    direction = 1.0 if other.y >= ego.y else -1.0
    return ego.speed_lat * direction, other.speed_lat * direction


def required_gap(  # noqa: PLR0913
    rear: VehicleState,
    front: VehicleState,
    rear_params: RssParams,
    front_params: RssParams,
    v_rear: float | None = None,
    v_front: float | None = None,
) -> float:
    """Center-to-center separation at which ``bumper_gap(rear, front)`` equals the longitudinal safe distance."""
    d_long = longitudinal_safe_distance(
        rear.speed_long if v_rear is None else v_rear,
        front.speed_long if v_front is None else v_front,
        rear_params,
        front_params.a_brake_max,
        rear.length,
        front.length,
    )
    return d_long + (rear.length + front.length) / 2


def safe_distances(
    ego: VehicleState,
    other: VehicleState,
    ego_params: RssParams,
    other_params: RssParams,
) -> SafeDistances:
    """Both distances for a pair, with the rear vehicle of the pair owing the longitudinal one."""
    if ego.x <= other.x:
        d_long = longitudinal_safe_distance(
            ego.speed_long, other.speed_long, ego_params, other_params.a_brake_max, ego.length, other.length
        )
    else:
        d_long = longitudinal_safe_distance(
            other.speed_long, ego.speed_long, other_params, ego_params.a_brake_max, other.length, ego.length
        )
    v_e, v_o = lateral_closing_speeds(ego, other)
    d_lat = lateral_safe_distance(v_e, v_o, ego_params, other_params, ego.width, other.width)
    return SafeDistances(d_long=d_long, d_lat=d_lat)
