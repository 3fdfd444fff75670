from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import pytest

from planner.domain import LaneGeometry, RssParams, VehicleState

if TYPE_CHECKING:
    from collections.abc import Callable

SCENARIOS_DIR = Path(__file__).resolve().parent.parent / "scenarios"

BASE_DOCUMENT: dict[str, Any] = {
    "name": "unit_scenario",
    "duration": 6.0,
    "dt": 0.02,
    "coop_enabled": False,
    "channel": {"delay": 0.1, "drop_probability": 0.0, "seed": 7},
    "vehicles": [
        {"id": "ego", "role": "ego", "x": 0.0, "y": -3.5, "speed": 20.0},
        {"id": "o1", "role": "obstacle", "x": -400.0, "y": 0.0, "speed": 15.0},
    ],
}


def vehicle(vid: str, x: float, y: float = 0.0, speed: float = 20.0, **kwargs: Any) -> VehicleState:
    return VehicleState(x=x, y=y, speed_long=speed, vid=vid, **kwargs)


@pytest.fixture
def lane() -> LaneGeometry:
    return LaneGeometry()


@pytest.fixture
def make_vehicle() -> Callable[..., VehicleState]:
    return vehicle


@pytest.fixture
def rss_for() -> Callable[..., dict[str, RssParams]]:
    def build(*vids: str, **overrides: float) -> dict[str, RssParams]:
        return {vid: RssParams(**overrides) for vid in vids}

    return build


@pytest.fixture
def scenario_document() -> dict[str, Any]:
    """A short scenario whose only obstacle is far behind: the gap ahead of it is wide open."""
    return copy.deepcopy(BASE_DOCUMENT)


@pytest.fixture
def write_scenario(tmp_path: Path) -> Callable[[dict[str, Any], str], Path]:
    def write(document: dict[str, Any], name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path

    return write


def load_bundled(name: str) -> dict[str, Any]:
    return json.loads((SCENARIOS_DIR / f"{name}.json").read_text())
