"""Linear 2-DOF dynamic bicycle with point-mass longitudinal dynamics, integrated with fixed-step RK4."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from planner.domain import ParameterError, RssParams, VehicleState, require_finite

MAX_DT = 0.05
# Below this speed the 1/v terms of the dynamic model blow up; the kinematic bicycle takes over.
KINEMATIC_SPEED = 3.0
LIMIT_TOLERANCE = 1e-9


@dataclass(frozen=True, slots=True)
class VehicleParams:
    mass: float = 1500.0
    yaw_inertia: float = 2500.0
    cornering_stiffness_front: float = 80000.0
    cornering_stiffness_rear: float = 80000.0
    dist_cg_front: float = 1.2
    dist_cg_rear: float = 1.6
    max_steer: float = 0.5
    v_max: float = 40.0
    rss: RssParams = field(default_factory=RssParams)

    def __post_init__(self) -> None:
        values = {
            "mass": self.mass,
            "yaw_inertia": self.yaw_inertia,
            "cornering_stiffness_front": self.cornering_stiffness_front,
            "cornering_stiffness_rear": self.cornering_stiffness_rear,
            "dist_cg_front": self.dist_cg_front,
            "dist_cg_rear": self.dist_cg_rear,
            "max_steer": self.max_steer,
            "v_max": self.v_max,
        }
        require_finite(**values)
        non_positive = [name for name, value in values.items() if value <= 0]
        if non_positive:
            msg = f"vehicle parameters must be > 0: {', '.join(non_positive)}"
            raise ParameterError(msg)
        if self.max_steer >= math.pi / 4:
            msg = f"max_steer must be < pi/4, got {self.max_steer}"
            raise ParameterError(msg)

    @property
    def wheelbase(self) -> float:
        return self.dist_cg_front + self.dist_cg_rear


def _dynamic_rates(state: np.ndarray, steer: float, accel: float, params: VehicleParams) -> np.ndarray:
    _, _, psi, beta, r, v = state
    v_eff = max(v, KINEMATIC_SPEED)
    m, iz = params.mass, params.yaw_inertia
    cf, cr = params.cornering_stiffness_front, params.cornering_stiffness_rear
    lf, lr = params.dist_cg_front, params.dist_cg_rear
    beta_dot = (
        -(cf + cr) / (m * v_eff) * beta + ((cr * lr - cf * lf) / (m * v_eff**2) - 1.0) * r + cf / (m * v_eff) * steer
    )
    r_dot = (cr * lr - cf * lf) / iz * beta - (cf * lf**2 + cr * lr**2) / (iz * v_eff) * r + cf * lf / iz * steer
    course = psi + beta
    return np.array([v * math.cos(course), v * math.sin(course), r, beta_dot, r_dot, accel])


def _kinematic_rates(state: np.ndarray, steer: float, accel: float, params: VehicleParams) -> np.ndarray:
    _, _, psi, _, _, v = state
    beta = math.atan(params.dist_cg_rear * math.tan(steer) / params.wheelbase)
    course = psi + beta
    yaw_rate = v * math.cos(beta) * math.tan(steer) / params.wheelbase
    return np.array([v * math.cos(course), v * math.sin(course), yaw_rate, 0.0, 0.0, accel])


def step_dynamics(
    state: VehicleState,
    steer: float,
    accel: float,
    dt: float,
    params: VehicleParams,
) -> VehicleState:
    """
    Advance one vehicle by ``dt`` seconds.

    Args:
        state: Current state; ``speed_long`` is the speed along the course.
        steer: Front-wheel angle (rad), positive to the left.
        accel: Longitudinal acceleration (m/s^2).
        dt: Step size (s), at most ``MAX_DT``.
        params: Vehicle parameters.

    Returns
    -------
        VehicleState: The propagated state with ``speed_lat`` set to the global lateral velocity.

    Raises
    ------
        ParameterError: When ``dt``, ``steer`` or ``accel`` are outside their ranges.
    """
    require_finite(steer=steer, accel=accel, dt=dt)
    if not 0 < dt <= MAX_DT:
        msg = f"dt must lie in (0, {MAX_DT}], got {dt}"
        raise ParameterError(msg)
    if abs(steer) > params.max_steer + LIMIT_TOLERANCE:
        msg = f"|steer| must be <= {params.max_steer}, got {steer}"
        raise ParameterError(msg)
    if not -params.rss.a_brake_max - LIMIT_TOLERANCE <= accel <= params.rss.a_accel_max + LIMIT_TOLERANCE:
        msg = f"accel must lie in [-{params.rss.a_brake_max}, {params.rss.a_accel_max}], got {accel}"
        raise ParameterError(msg)

    v0 = state.speed_long
    # Reach the speed bound exactly at the end of the step instead of overshooting it.
    accel = min(max(accel, -v0 / dt), (params.v_max - v0) / dt)
    kinematic = v0 < KINEMATIC_SPEED
    rates = _kinematic_rates if kinematic else _dynamic_rates

    y0 = np.array([state.x, state.y, state.heading, state.sideslip, state.yaw_rate, v0])
    k1 = rates(y0, steer, accel, params)
    k2 = rates(y0 + dt / 2 * k1, steer, accel, params)
    k3 = rates(y0 + dt / 2 * k2, steer, accel, params)
    k4 = rates(y0 + dt * k3, steer, accel, params)
    x, y, heading, sideslip, yaw_rate, v = y0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    v = min(max(v, 0.0), params.v_max)
    if kinematic:
        sideslip = math.atan(params.dist_cg_rear * math.tan(steer) / params.wheelbase)
        yaw_rate = v * math.cos(sideslip) * math.tan(steer) / params.wheelbase
    return replace(
        state,
        x=float(x),
        y=float(y),
        heading=float(heading),
        sideslip=float(sideslip),
        yaw_rate=float(yaw_rate),
        speed_long=float(v),
        speed_lat=float(v * math.sin(heading + sideslip)),
    )
