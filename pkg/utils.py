import copy
import json
import math
from typing import TYPE_CHECKING, Any

from config.schema import ConfigValidationError
from persistence.base import TraceSink
from persistence.file_store import RunDirectorySink
from planner.merge_rules import Policy
from policy.base import ObstaclePolicy
from policy.cooperative import CooperativePolicy
from policy.non_cooperative import NonCooperativePolicy
from policy.silent import SilentPolicy

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable

SWEEP_EPS = 1e-9


def build_policy(policy: Policy | str) -> ObstaclePolicy:
    """Build the obstacle driver for a policy name."""
    policy_builders: dict[str, Callable[[], ObstaclePolicy]] = {
        Policy.COOPERATIVE: CooperativePolicy,
        Policy.NON_COOPERATIVE: NonCooperativePolicy,
        Policy.SILENT: SilentPolicy,
    }

    if policy not in policy_builders:
        msg = f"[ERROR] Obstacle policy '{policy}' not supported"
        raise NotImplementedError(msg)

    return policy_builders[policy]()


def get_sink(config: dict[str, Any]) -> TraceSink:
    if config.get("type", "directory") == "directory":
        return RunDirectorySink(config["path"], plots=config.get("plots", True))
    msg = f"[ERROR] Trace sink '{config['type']}' not supported"
    raise NotImplementedError(msg)


def parse_value(text: str) -> Any:
    """JSON value when ``text`` parses as one, the raw string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_assignment(text: str) -> tuple[str, Any]:
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep or not key:
        msg = f"override must look like key=value, got {text!r}"
        raise ValueError(msg)
    return key, parse_value(value.strip())


def set_dotted(document: dict[str, Any], key: str, value: Any) -> None:
    """
    Assign ``value`` at a dotted ``key`` inside ``document``.

    Integer segments index lists. Under ``vehicles`` a non-integer segment selects the vehicle with that
    ``id``. Missing object keys are created so that validation can report them if they are unknown.

    Raises
    ------
        ConfigValidationError: When a segment cannot be resolved.
    """
    segments = key.split(".")
    node: Any = document
    for depth, segment in enumerate(segments):
        last = depth == len(segments) - 1
        where = ".".join(segments[: depth + 1])
        if isinstance(node, list):
            index = _list_index(node, segment, segments[depth - 1] if depth else "", where)
            if last:
                node[index] = value
                return
            node = node[index]
        elif isinstance(node, dict):
            if last:
                node[segment] = value
                return
            node = node.setdefault(segment, {})
        else:
            raise ConfigValidationError([f"{where}: cannot descend into a {type(node).__name__}"])


def _list_index(node: list[Any], segment: str, parent: str, where: str) -> int:
    if segment.lstrip("-").isdigit():
        index = int(segment)
        if not -len(node) <= index < len(node):
            raise ConfigValidationError([f"{where}: index out of range for {len(node)} entries"])
        return index
    if parent == "vehicles":
        for index, item in enumerate(node):
            if isinstance(item, dict) and item.get("id") == segment:
                return index
        raise ConfigValidationError([f"{where}: no vehicle with id {segment!r}"])
    raise ConfigValidationError([f"{where}: list segments must be integers"])


def apply_overrides(document: dict[str, Any], assignments: "Iterable[str]") -> dict[str, Any]:
    """Return a copy of ``document`` with every ``key=value`` assignment applied in order."""
    result = copy.deepcopy(document)
    errors: list[str] = []
    for text in assignments:
        try:
            key, value = parse_assignment(text)
            set_dotted(result, key, value)
        except ConfigValidationError as e:
            errors.extend(e.errors)
        except ValueError as e:
            errors.append(f"--set: {e}")
    if errors:
        raise ConfigValidationError(errors)
    return result


def parse_sweep_spec(text: str) -> tuple[str, list[float]]:
    """
    Parse ``key=start:stop:step`` into the key and its inclusive grid.

    Raises
    ------
        ValueError: On a malformed or non-numeric spec, a non-positive step or an empty grid.
    """
    key, sep, spec = text.partition("=")
    key = key.strip()
    parts = spec.split(":")
    if not sep or not key or len(parts) != 3:
        msg = f"sweep spec must look like key=start:stop:step, got {text!r}"
        raise ValueError(msg)
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as e:
        msg = f"sweep spec {text!r} is not numeric"
        raise ValueError(msg) from e
    if not all(math.isfinite(v) for v in (start, stop, step)) or step <= 0:
        msg = f"sweep spec {text!r} needs finite bounds and a step > 0"
        raise ValueError(msg)
    if start > stop:
        msg = f"sweep spec {text!r} gives an empty grid"
        raise ValueError(msg)
    count = math.floor((stop - start) / step + SWEEP_EPS) + 1
    return key, [round(start + i * step, 12) for i in range(count)]
