from __future__ import annotations

import numpy as np
import pytest

from planner.domain import ParameterError, RssParams, VehicleState
from planner.rss import (
    lateral_closing_speeds,
    lateral_safe_distance,
    longitudinal_safe_distance,
    required_gap,
    safe_distances,
)


def direct_longitudinal(  # noqa: PLR0913
    v_r: float, v_f: float, t: float, a_acc: float, b_min: float, b_max_front: float, l_r: float, l_f: float
) -> float:
    v_rho = v_r + a_acc * t
    value = v_r * t + a_acc * t * t / 2 + (l_r + l_f) / 2 + v_rho * v_rho / (2 * b_min) - v_f * v_f / (2 * b_max_front)
    return max(value, 0.0)


def direct_lateral(  # noqa: PLR0913
    v1: float, v2: float, t: float, acc1: float, acc2: float, brk1: float, brk2: float, w1: float, w2: float, mu: float
) -> float:
    v1_rho = v1 + acc1 * t
    v2_rho = v2 - acc2 * t
    first = (v1 + v1_rho) / 2 * t + v1_rho**2 / (2 * brk1)
    second = (v2 + v2_rho) / 2 * t + v2_rho**2 / (2 * brk2)
    return mu + max(first + (w1 + w2) / 2 - second, 0.0)


def test_longitudinal_only_lengths_remain_at_standstill() -> None:
    params = RssParams(t_lag=0.0)
    assert longitudinal_safe_distance(0.0, 0.0, params, 8.0, 4.0, 4.0) == pytest.approx(4.0)


def test_longitudinal_reference_value() -> None:
    params = RssParams(t_lag=0.5, a_accel_max=3.0, a_brake_min=4.0, a_brake_max=8.0)
    assert longitudinal_safe_distance(20.0, 20.0, params, 6.0, 4.6, 4.6) == pytest.approx(39.423, abs=1e-3)


def test_longitudinal_clamps_at_zero_when_front_is_much_faster() -> None:
    params = RssParams(t_lag=0.1, a_accel_max=1.0, a_brake_min=4.0, a_brake_max=4.0)
    assert longitudinal_safe_distance(0.0, 30.0, params, 4.0, 4.0, 4.0) == 0.0


@pytest.mark.parametrize(
    ("v_ego", "v_front", "front_brake_max"),
    [(-1.0, 10.0, 8.0), (10.0, float("nan"), 8.0), (10.0, 10.0, 0.0)],
)
def test_longitudinal_rejects_invalid_inputs(v_ego: float, v_front: float, front_brake_max: float) -> None:
    with pytest.raises(ParameterError):
        longitudinal_safe_distance(v_ego, v_front, RssParams(), front_brake_max, 4.6, 4.6)


def test_lateral_at_rest_is_half_widths_plus_margin() -> None:
    params = RssParams(t_lag=0.0, mu=0.1)
    assert lateral_safe_distance(0.0, 0.0, params, params, 2.0, 2.0) == pytest.approx(2.1)


def test_lateral_zero_case() -> None:
    params = RssParams(t_lag=0.0, mu=0.0)
    assert lateral_safe_distance(0.0, 0.0, params, params, 0.0, 0.0) == 0.0


def test_lateral_reference_value() -> None:
    params = RssParams(t_lag=0.3, a_accel_lat_max=0.5, a_brake_lat_min=1.0, mu=0.1)
    assert lateral_safe_distance(0.5, -0.5, params, params, 1.8, 1.8) == pytest.approx(2.245, abs=1e-9)


def test_distances_match_direct_evaluation_on_random_draws() -> None:
    rng = np.random.default_rng(1234)
    for _ in range(1000):
        t_lag = rng.uniform(0.0, 1.5)
        a_acc = rng.uniform(0.5, 5.0)
        b_min = rng.uniform(1.0, 8.0)
        b_max = b_min + rng.uniform(0.0, 4.0)
        lat_acc = rng.uniform(0.0, 2.0)
        lat_brk = rng.uniform(0.2, 3.0)
        mu = rng.uniform(0.0, 0.5)
        params = RssParams(
            t_lag=t_lag,
            a_accel_max=a_acc,
            a_brake_min=b_min,
            a_brake_max=b_max,
            a_accel_lat_max=lat_acc,
            a_brake_lat_min=lat_brk,
            mu=mu,
        )
        v_r, v_f = rng.uniform(0.0, 40.0, size=2)
        front_brake = rng.uniform(1.0, 10.0)
        l_r, l_f = rng.uniform(3.0, 12.0, size=2)
        expected = direct_longitudinal(v_r, v_f, t_lag, a_acc, b_min, front_brake, l_r, l_f)
        actual = longitudinal_safe_distance(v_r, v_f, params, front_brake, l_r, l_f)
        assert actual == pytest.approx(expected, rel=1e-9, abs=1e-12)

        v1, v2 = rng.uniform(-2.0, 2.0, size=2)
        w1, w2 = rng.uniform(1.0, 3.0, size=2)
        expected_lat = direct_lateral(v1, v2, t_lag, lat_acc, lat_acc, lat_brk, lat_brk, w1, w2, mu)
        actual_lat = lateral_safe_distance(v1, v2, params, params, w1, w2)
        assert actual_lat == pytest.approx(expected_lat, rel=1e-9, abs=1e-12)


def test_longitudinal_grows_with_rear_speed_and_shrinks_with_front_speed() -> None:
    params = RssParams()
    speeds = np.linspace(0.0, 40.0, 81)
    rear = [longitudinal_safe_distance(v, 20.0, params, 8.0, 4.6, 4.6) for v in speeds]
    front = [longitudinal_safe_distance(20.0, v, params, 8.0, 4.6, 4.6) for v in speeds]
    assert all(b >= a for a, b in zip(rear, rear[1:], strict=False))
    assert all(b <= a for a, b in zip(front, front[1:], strict=False))


def test_required_gap_adds_half_lengths() -> None:
    params = RssParams()
    rear = VehicleState(x=0.0, y=0.0, speed_long=20.0)
    front = VehicleState(x=50.0, y=0.0, speed_long=20.0)
    d_long = longitudinal_safe_distance(20.0, 20.0, params, params.a_brake_max, 4.6, 4.6)
    assert required_gap(rear, front, params, params) == pytest.approx(d_long + 4.6)


def test_closing_speeds_point_from_ego_to_other() -> None:
    ego = VehicleState(x=0.0, y=-3.5, speed_lat=0.5)
    other = VehicleState(x=0.0, y=0.0, speed_lat=-0.2)
    assert lateral_closing_speeds(ego, other) == (0.5, -0.2)
    assert lateral_closing_speeds(other, ego) == (0.2, -0.5)


def test_safe_distances_assigns_longitudinal_duty_to_rear_vehicle() -> None:
    params = RssParams()
    ego = VehicleState(x=50.0, y=-3.5, speed_long=10.0)
    behind = VehicleState(x=0.0, y=0.0, speed_long=30.0)
    distances = safe_distances(ego, behind, params, params)
    assert distances.d_long == pytest.approx(longitudinal_safe_distance(30.0, 10.0, params, 8.0, 4.6, 4.6))
    assert distances.d_lat >= params.mu
