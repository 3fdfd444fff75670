from __future__ import annotations

import json
from typing import TYPE_CHECKING, Any

import pytest
import requests
import yaml

from config.loader import get_loader, load_scenario
from config.loaders.http import HTTPConfigLoader
from config.loaders.local import LocalConfigLoader
from config.schema import ConfigValidationError, validate_scenario
from planner.merge_rules import Policy
from tests.conftest import SCENARIOS_DIR, load_bundled
from utils import apply_overrides, parse_sweep_spec, set_dotted

if TYPE_CHECKING:
    from collections.abc import Callable
    from pathlib import Path


def errors_for(document: dict[str, Any]) -> list[str]:
    with pytest.raises(ConfigValidationError) as info:
        validate_scenario(document)
    return info.value.errors


def test_valid_document_builds_a_typed_scenario(scenario_document: dict[str, Any]) -> None:
    scenario = validate_scenario(scenario_document)
    assert scenario.steps == 300
    assert scenario.ego.vid == "ego"
    assert [o.vid for o in scenario.obstacles] == ["o1"]
    assert scenario.obstacles[0].policy is Policy.NON_COOPERATIVE
    assert scenario.channel.seed == 7
    assert scenario.ego.cruise_speed == 20.0


def test_zero_dt_is_rejected(scenario_document: dict[str, Any]) -> None:
    scenario_document["dt"] = 0
    assert errors_for(scenario_document) == ["dt: must lie in (0, 0.05], got 0.0"]


def test_unknown_keys_are_reported(scenario_document: dict[str, Any]) -> None:
    scenario_document["colour"] = "red"
    scenario_document["vehicles"][0]["turbo"] = True
    assert errors_for(scenario_document) == ["colour: unknown key", "vehicles[0].turbo: unknown key"]


def test_exactly_one_ego(scenario_document: dict[str, Any]) -> None:
    scenario_document["vehicles"].append({"id": "ego2", "role": "ego", "x": 50.0, "y": -3.5, "speed": 20.0})
    assert "vehicles: exactly one vehicle must have role 'ego', found 2" in errors_for(scenario_document)


def test_obstacle_must_start_in_the_main_lane(scenario_document: dict[str, Any]) -> None:
    scenario_document["vehicles"][1]["y"] = -3.5
    (error,) = errors_for(scenario_document)
    assert error.startswith("vehicles[1].y: obstacle must start in the main lane")


def test_duration_must_be_a_whole_number_of_steps(scenario_document: dict[str, Any]) -> None:
    scenario_document["duration"] = 6.01
    (error,) = errors_for(scenario_document)
    assert error.startswith("duration: must be an integral number of dt steps")


def test_every_error_is_collected(scenario_document: dict[str, Any]) -> None:
    scenario_document["dt"] = 0.5
    scenario_document["vehicles"][1]["policy"] = "Aggressive"
    scenario_document["merge"] = {"rho_m": -1.0}
    errors = errors_for(scenario_document)
    assert len(errors) == 3
    assert any(e.startswith("vehicles[1].policy") for e in errors)
    assert any(e.startswith("merge: rho_m and rho_c must be > 0") for e in errors)


def test_nested_parameter_blocks_are_validated(scenario_document: dict[str, Any]) -> None:
    scenario_document["vehicles"][0]["rss"] = {"a_brake_min": 10.0}
    (error,) = errors_for(scenario_document)
    assert error.startswith("vehicles[0].rss: a_brake_max")


def test_events_must_name_known_vehicles(scenario_document: dict[str, Any]) -> None:
    scenario_document["events"] = [{"t": 2.0, "despawn": ["o9"]}]
    assert errors_for(scenario_document) == ["events[0].despawn: unknown vehicle id 'o9'"]


@pytest.mark.parametrize("path", sorted(SCENARIOS_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_scenarios_validate(path: Path) -> None:
    scenario = validate_scenario(load_bundled(path.stem))
    assert scenario.name == path.stem


def test_local_loader_reads_json_and_yaml(
    scenario_document: dict[str, Any], write_scenario: Callable[[dict[str, Any], str], Path], tmp_path: Path
) -> None:
    assert LocalConfigLoader(str(write_scenario(scenario_document, "s.json"))).load() == scenario_document
    yaml_path = tmp_path / "s.yaml"
    yaml_path.write_text(yaml.safe_dump(scenario_document))
    assert load_scenario(str(yaml_path)) == scenario_document


def test_local_loader_errors(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        LocalConfigLoader(str(tmp_path / "missing.json")).load()
    empty = tmp_path / "empty.json"
    empty.write_text("  \n")
    with pytest.raises(ValueError, match="empty"):
        LocalConfigLoader(str(empty)).load()
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ValueError, match="Invalid JSON"):
        LocalConfigLoader(str(broken)).load()
    listed = tmp_path / "listed.json"
    listed.write_text("[1, 2]")
    with pytest.raises(ValueError, match="object at the top level"):
        LocalConfigLoader(str(listed)).load()


class FakeResponse:
    def __init__(self, text: str, status: int = 200) -> None:
        self.text = text
        self.status = status

    def raise_for_status(self) -> None:
        if self.status >= 400:
            msg = f"{self.status} error"
            raise requests.HTTPError(msg)


def test_loader_is_chosen_by_scheme() -> None:
    assert isinstance(get_loader("https://example.org/s.json"), HTTPConfigLoader)
    assert isinstance(get_loader("scenarios/s.json"), LocalConfigLoader)


def test_http_loader_parses_the_body(monkeypatch: pytest.MonkeyPatch, scenario_document: dict[str, Any]) -> None:
    body = json.dumps(scenario_document)
    monkeypatch.setattr("config.loaders.http.requests.get", lambda *_args, **_kwargs: FakeResponse(body))
    assert HTTPConfigLoader("https://example.org/s.json").load() == scenario_document


def test_http_loader_retries_then_gives_up(monkeypatch: pytest.MonkeyPatch) -> None:
    calls = []

    def failing_get(*_args: Any, **_kwargs: Any) -> FakeResponse:
        calls.append(1)
        return FakeResponse("", status=503)

    monkeypatch.setattr("config.loaders.http.requests.get", failing_get)
    monkeypatch.setattr("time.sleep", lambda _seconds: None)
    with pytest.raises(ConnectionError, match="Failed to fetch"):
        HTTPConfigLoader("https://example.org/s.json").load()
    assert len(calls) == 3


def test_http_loader_rejects_non_objects(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setattr("config.loaders.http.requests.get", lambda *_args, **_kwargs: FakeResponse("- 1\n- 2\n"))
    with pytest.raises(ValueError, match="object at the top level"):
        HTTPConfigLoader("https://example.org/s.yaml").load()


def test_overrides_address_vehicles_by_id(scenario_document: dict[str, Any]) -> None:
    updated = apply_overrides(scenario_document, ["vehicles.o1.speed=18", "merge.rho_m=2", "coop_enabled=true"])
    assert updated["vehicles"][1]["speed"] == 18
    assert updated["merge"] == {"rho_m": 2}
    assert updated["coop_enabled"] is True
    assert scenario_document["vehicles"][1]["speed"] == 15.0


def test_set_dotted_by_index_and_errors(scenario_document: dict[str, Any]) -> None:
    set_dotted(scenario_document, "vehicles.0.policy", "Silent")
    assert scenario_document["vehicles"][0]["policy"] == "Silent"
    with pytest.raises(ConfigValidationError, match="no vehicle with id 'o7'"):
        set_dotted(scenario_document, "vehicles.o7.speed", 1.0)
    with pytest.raises(ConfigValidationError, match="index out of range"):
        set_dotted(scenario_document, "vehicles.5.speed", 1.0)


def test_malformed_overrides_are_collected(scenario_document: dict[str, Any]) -> None:
    with pytest.raises(ConfigValidationError) as info:
        apply_overrides(scenario_document, ["novalue", "vehicles.zz.x=1"])
    assert len(info.value.errors) == 2


def test_parse_sweep_spec() -> None:
    assert parse_sweep_spec("merge.rho_m=2:6:2") == ("merge.rho_m", [2.0, 4.0, 6.0])
    assert parse_sweep_spec("channel.delay=0:0.3:0.1")[1] == [0.0, 0.1, 0.2, 0.3]


@pytest.mark.parametrize("text", ["merge.rho_m", "merge.rho_m=1:2", "x=a:b:c", "x=0:1:0", "x=2:1:0.5"])
def test_parse_sweep_spec_rejects_bad_specs(text: str) -> None:
    with pytest.raises(ValueError, match="sweep spec"):
        parse_sweep_spec(text)
