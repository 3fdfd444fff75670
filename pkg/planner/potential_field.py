"""Road-marking, obstacle and lane-center potentials used as the crossing-point selection cost."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np

from planner.domain import LaneGeometry, ParameterError, VehicleState, require_finite

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from planner.rss import SafeDistances

GRADIENT_STEP = 0.01


class FieldMode(StrEnum):
    LANE_KEEPING = "LaneKeeping"
    LANE_MERGING = "LaneMerging"


@dataclass(frozen=True, slots=True)
class FieldParams:
    beta: float = 0.05
    gamma: float = 1.0
    sigma_lat: float = 0.13
    sigma_long: float = 0.002
    u_floor: float = 0.01
    xi: float = 1.0
    d_star: float = 30.0
    eps_denominator: float = 0.05

    def __post_init__(self) -> None:
        require_finite(
            beta=self.beta,
            gamma=self.gamma,
            sigma_lat=self.sigma_lat,
            sigma_long=self.sigma_long,
            u_floor=self.u_floor,
            xi=self.xi,
            d_star=self.d_star,
            eps_denominator=self.eps_denominator,
        )
        if min(self.beta, self.gamma, self.xi, self.d_star, self.eps_denominator) <= 0:
            msg = "beta, gamma, xi, d_star and eps_denominator must be > 0"
            raise ParameterError(msg)
        if self.sigma_lat < 0 or self.sigma_long < 0:
            msg = "sigma_lat and sigma_long must be >= 0"
            raise ParameterError(msg)
        if not 0 < self.u_floor < 1:
            msg = f"u_floor must lie in (0, 1), got {self.u_floor}"
            raise ParameterError(msg)


@dataclass(frozen=True, slots=True)
class Scene:
    """
    Environment seen by the field.

    ``target_waypoint`` fixes (X_d, Y_d). When it is None the waypoint is sampled on the target lane
    center ``d_star`` ahead of each query point, which keeps the attraction comparable along a long path.
    """

    lane: LaneGeometry
    obstacles: tuple[VehicleState, ...] = ()
    target_waypoint: tuple[float, float] | None = None
    mode: FieldMode = FieldMode.LANE_KEEPING
    target_lane_y: float | None = None
    safe_distances: tuple[SafeDistances, ...] = field(default=())
    ego_width: float = 1.8

    def __post_init__(self) -> None:
        if self.target_waypoint is not None:
            require_finite(x_d=self.target_waypoint[0], y_d=self.target_waypoint[1])
        elif self.target_lane_y is None:
            msg = "scene needs a target_waypoint or a target_lane_y"
            raise ParameterError(msg)
        if self.safe_distances and len(self.safe_distances) != len(self.obstacles):
            msg = "safe_distances must match obstacles one to one"
            raise ParameterError(msg)


def road_marking_potential(
    y: ArrayLike,
    boundary_y: float,
    vehicle_width: float,
    params: FieldParams,
) -> NDArray[np.float64] | float:
    """
    Repulsion of one road boundary.

    The denominator is the clearance between the near vehicle edge and the boundary, so the term peaks as
    either edge reaches its marking whichever side of the lane it lies on. The clearance is clamped at
    ``eps_denominator``.
    """
    clearance = np.abs(np.asarray(y, dtype=float) - boundary_y) - vehicle_width / 2
    denom = np.maximum(np.abs(clearance), params.eps_denominator)
    return _as_output(0.5 * params.beta * (1.0 / denom) ** 2)


def obstacle_potential(
    pos: tuple[ArrayLike, ArrayLike],
    obstacle_pos: tuple[ArrayLike, ArrayLike],
    params: FieldParams,
    sigma_lat: float | None = None,
    sigma_long: float | None = None,
) -> NDArray[np.float64] | float:
    s_lat = params.sigma_lat if sigma_lat is None else sigma_lat
    s_long = params.sigma_long if sigma_long is None else sigma_long
    dx = np.asarray(pos[0], dtype=float) - np.asarray(obstacle_pos[0], dtype=float)
    dy = np.asarray(pos[1], dtype=float) - np.asarray(obstacle_pos[1], dtype=float)
    return _as_output(params.gamma * np.abs(np.exp(-(s_lat * dy**2 + s_long * dx**2)) - params.u_floor))


def lane_center_potential(
    pos: tuple[ArrayLike, ArrayLike],
    scene: Scene,
    params: FieldParams,
) -> NDArray[np.float64] | float:
    """Attraction toward the target waypoint; the lane-merging branch is linear and may go negative near it."""
    x = np.asarray(pos[0], dtype=float)
    y = np.asarray(pos[1], dtype=float)
    if scene.target_waypoint is not None:
        x_d, y_d = scene.target_waypoint
    else:
        x_d, y_d = x + params.d_star, scene.target_lane_y
    d = np.hypot(x - x_d, y - y_d)
    if scene.mode is FieldMode.LANE_KEEPING:
        return _as_output(params.xi * d**2 / 2)
    return _as_output(params.d_star * params.xi * d - params.xi * params.d_star**2 / 2)


def sigmas_for(distances: SafeDistances | None, params: FieldParams) -> tuple[float, float]:
    """Gaussian widths whose one-sigma contour sits at the safe distances."""
    if distances is None:
        return params.sigma_lat, params.sigma_long
    s_lat = 1 / (2 * distances.d_lat**2) if distances.d_lat > 0 else params.sigma_lat
    s_long = 1 / (2 * distances.d_long**2) if distances.d_long > 0 else params.sigma_long
    return s_lat, s_long


def total_potential(
    pos: tuple[ArrayLike, ArrayLike],
    scene: Scene,
    params: FieldParams,
    distances: tuple[SafeDistances, ...] | None = None,
    *,
    t: ArrayLike | None = None,
) -> NDArray[np.float64] | float:
    """
    Sum of both boundary terms, every obstacle term and the lane-center term.

    Args:
        pos: Query coordinates (scalars or broadcastable arrays).
        scene: Environment.
        params: Field coefficients.
        distances: Per-obstacle safe distances; defaults to ``scene.safe_distances``.
        t: Optional times matching ``pos``; obstacles are then advanced at constant speed.

    Returns
    -------
        Potential with the broadcast shape of ``pos``.
    """
    x = np.asarray(pos[0], dtype=float)
    y = np.asarray(pos[1], dtype=float)
    lane = scene.lane
    total = road_marking_potential(y, lane.y_left, scene.ego_width, params)
    total = total + road_marking_potential(y, lane.y_right, scene.ego_width, params)

    per_obstacle = distances if distances is not None else scene.safe_distances
    for k, obstacle in enumerate(scene.obstacles):
        s_lat, s_long = sigmas_for(per_obstacle[k] if per_obstacle else None, params)
        x_o = obstacle.x if t is None else obstacle.x + obstacle.speed_long * np.asarray(t, dtype=float)
        total = total + obstacle_potential((x, y), (x_o, obstacle.y), params, s_lat, s_long)

    total = total + lane_center_potential((x, y), scene, params)
    return _as_output(np.asarray(total, dtype=float))


def potential_gradient(
    pos: tuple[float, float],
    scene: Scene,
    params: FieldParams,
    h: float = GRADIENT_STEP,
) -> tuple[float, float]:
    """Central-difference gradient of ``total_potential``."""
    x, y = float(pos[0]), float(pos[1])
    d_dx = (float(total_potential((x + h, y), scene, params)) - float(total_potential((x - h, y), scene, params))) / (
        2 * h
    )
    d_dy = (float(total_potential((x, y + h), scene, params)) - float(total_potential((x, y - h), scene, params))) / (
        2 * h
    )
    return d_dx, d_dy


def field_grid(scene: Scene, params: FieldParams, xs: ArrayLike, ys: ArrayLike) -> NDArray[np.float64]:
    """Rasterize the field as ``(x, y, P)`` rows for dumping."""
    grid_x, grid_y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
    values = np.asarray(total_potential((grid_x, grid_y), scene, params), dtype=float)
    return np.column_stack([grid_x.ravel(), grid_y.ravel(), values.ravel()])


def force_arrows(scene: Scene, params: FieldParams, xs: ArrayLike, ys: ArrayLike) -> NDArray[np.float64]:
    """Field force ``-grad P`` as ``(x, y, F_x, F_y)`` rows, in the same row order as ``field_grid``."""
    rows = []
    for y in np.asarray(ys, dtype=float):
        for x in np.asarray(xs, dtype=float):
            d_dx, d_dy = potential_gradient((x, y), scene, params)
            rows.append((x, y, -d_dx, -d_dy))
    return np.array(rows, dtype=float).reshape(-1, 4)


def _as_output(values: NDArray[np.float64]) -> NDArray[np.float64] | float:
    return float(values) if values.ndim == 0 else values
