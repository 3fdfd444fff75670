"""Side-by-side scenario comparison and parameter sweeps."""

from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from config.schema import ConfigValidationError, validate_scenario
from logging_config import get_logger
from sim.harness import run_scenario
from utils import set_dotted

if TYPE_CHECKING:
    from collections.abc import Sequence

    from config.schema import ScenarioConfig
    from sim.metrics import Metrics
    from sim.trace import Trace

logger = get_logger(__name__)


@dataclass(frozen=True, slots=True)
class ComparisonRow:
    name: str
    metrics: Metrics


@dataclass(frozen=True, slots=True)
class PairDelta:
    base: str
    other: str
    merge_time_pct: float | None
    path_length_pct: float | None


@dataclass(frozen=True, slots=True)
class Comparison:
    rows: tuple[ComparisonRow, ...]
    deltas: tuple[PairDelta, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [{"name": row.name, **row.metrics.to_dict()} for row in self.rows],
            "deltas": [
                {
                    "base": d.base,
                    "other": d.other,
                    "merge_time_pct": d.merge_time_pct,
                    "path_length_pct": d.path_length_pct,
                }
                for d in self.deltas
            ],
        }


def percent_delta(base: float | None, other: float | None) -> float | None:
    if base is None or other is None or base == 0:
        return None
    return (other - base) / base * 100.0


def pair_delta(base: ComparisonRow, other: ComparisonRow) -> PairDelta:
    """Relative change from ``base`` to ``other``; absent when either run did not complete its merge."""
    if not (base.metrics.completed and other.metrics.completed):
        return PairDelta(base=base.name, other=other.name, merge_time_pct=None, path_length_pct=None)
    return PairDelta(
        base=base.name,
        other=other.name,
        merge_time_pct=percent_delta(base.metrics.merge_time, other.metrics.merge_time),
        path_length_pct=percent_delta(base.metrics.path_length, other.metrics.path_length),
    )


def compare_scenarios(configs: Sequence[ScenarioConfig]) -> tuple[Comparison, dict[str, Trace]]:
    """
    Run every scenario and tabulate its metrics with pairwise percentage deltas.

    Returns
    -------
        tuple: The comparison and the traces keyed by row label.

    Raises
    ------
        ValueError: With fewer than two scenarios.
    """
    if len(configs) < 2:
        msg = f"comparison needs at least two scenarios, got {len(configs)}"
        raise ValueError(msg)
    rows = []
    traces: dict[str, Trace] = {}
    for i, config in enumerate(configs):
        label = config.name if config.name not in traces else f"{config.name}#{i}"
        try:
            trace, metrics = run_scenario(config)
        except Exception as e:
            msg = f"scenario {config.name} failed: {e}"
            raise RuntimeError(msg) from e
        traces[label] = trace
        rows.append(ComparisonRow(name=label, metrics=metrics))
    deltas = tuple(pair_delta(a, b) for a, b in itertools.combinations(rows, 2))
    return Comparison(rows=tuple(rows), deltas=deltas), traces


def sweep_documents(
    document: dict[str, Any],
    grid: Sequence[tuple[str, Sequence[float]]],
) -> list[tuple[dict[str, float], ScenarioConfig]]:
    """
    Expand the cartesian ``grid`` over ``document`` and validate every point up front.

    Raises
    ------
        ConfigValidationError: Listing the offending fields of every invalid point.
    """
    keys = [key for key, _ in grid]
    points = []
    errors = []
    for values in itertools.product(*(vals for _, vals in grid)):
        assignment = dict(zip(keys, values, strict=True))
        point = copy.deepcopy(document)
        try:
            for key, value in assignment.items():
                set_dotted(point, key, value)
            points.append((assignment, validate_scenario(point)))
        except ConfigValidationError as e:
            label = ", ".join(f"{k}={v}" for k, v in assignment.items())
            errors.extend(f"[{label}] {err}" for err in e.errors)
    if errors:
        raise ConfigValidationError(errors)
    return points


def run_sweep(points: Sequence[tuple[dict[str, float], ScenarioConfig]]) -> list[dict[str, Any]]:
    """One row per grid point: parameter columns followed by the metrics."""
    rows = []
    for assignment, config in points:
        logger.info("Sweep point %s", assignment)
        _, metrics = run_scenario(config)
        rows.append({**assignment, **metrics.to_dict()})
    return rows
