import csv
import json
import sys
import traceback
from pathlib import Path
from typing import TYPE_CHECKING, Any, NoReturn

import click
import numpy as np

from config.loader import load_scenario
from config.schema import ConfigValidationError, validate_scenario
from persistence.file_store import read_scenario, read_trace, render_plots
from plots import save_xy_paths
from render_report import render_comparison
from sim.compare import compare_scenarios, run_sweep, sweep_documents
from sim.harness import run_scenario
from utils import apply_overrides, get_sink, parse_sweep_spec

if TYPE_CHECKING:
    from config.schema import ScenarioConfig

EXIT_INVALID = 2
EXIT_RUNTIME = 3
DEFAULT_OUT = Path("runs")


def fail(message: str, code: int) -> NoReturn:
    click.echo(f"❌ {message}", err=True)
    sys.exit(code)


def prepare(
    source: str,
    overrides: tuple[str, ...],
    dt: float | None,
    seed: int | None,
) -> tuple[dict[str, Any], "ScenarioConfig"]:
    """Load, override and validate one scenario; every failure here exits with code 2."""
    assignments = list(overrides)
    if dt is not None:
        assignments.append(f"dt={dt!r}")
    if seed is not None:
        assignments.append(f"channel.seed={seed}")
    try:
        document = apply_overrides(load_scenario(source), assignments)
        return document, validate_scenario(document)
    except ConfigValidationError as e:
        click.echo(f"❌ Invalid scenario {source}:", err=True)
        for error in e.errors:
            click.echo(f"  - {error}", err=True)
    except (FileNotFoundError, ValueError, ConnectionError) as e:
        click.echo(f"❌ Could not load scenario {source}: {e}", err=True)
    sys.exit(EXIT_INVALID)


common_options = [
    click.option("--dt", type=float, default=None, help="Override the integration step (s)."),
    click.option("--seed", type=int, default=None, help="Override the channel drop seed."),
    click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Dotted-key override, repeatable."),
]


def with_common_options(func: Any) -> Any:
    for option in reversed(common_options):
        func = option(func)
    return func


@click.group()
def main() -> None:
    """Rule-compliance merge planner - simulate, compare and sweep highway lane-merge scenarios.

    Examples
    --------
      python main.py run scenarios/situation3_coop_ahead.json --out runs/s3
      python main.py compare scenarios/tight_gap_noncoop.json scenarios/situation3_coop_ahead.json
      python main.py sweep scenarios/situation3_coop_ahead.json --param merge.rho_m=2:6:2
      python main.py validate scenarios/*.json
      python main.py plot runs/s3
    """


@main.command()
@click.argument("config")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Run directory.")
@click.option("--no-plots", is_flag=True, help="Skip the SVG figures.")
@with_common_options
def run(  # noqa: PLR0913
    config: str,
    out: Path | None,
    no_plots: bool,
    dt: float | None,
    seed: int | None,
    overrides: tuple[str, ...],
) -> None:
    """Simulate one scenario and write its trace, messages, metrics, paths and plots."""
    document, scenario = prepare(config, overrides, dt, seed)
    out = out or DEFAULT_OUT / scenario.name
    click.echo(f"🚗 Running {scenario.name} ({scenario.steps} steps of {scenario.dt} s)")
    try:
        trace, metrics = run_scenario(scenario)
        sink = get_sink({"type": "directory", "path": out, "plots": not no_plots})
        sink.write_run(document, trace, metrics)
        sink.close()
    except Exception as e:
        traceback.print_exc()
        fail(f"Scenario {scenario.name} failed: {e}", EXIT_RUNTIME)

    status = "✅ merged" if metrics.completed else "⚠️  did not merge"
    merge_time = "n/a" if metrics.merge_time is None else f"{metrics.merge_time:.2f} s"
    click.echo(f"{status}: merge_time={merge_time}, rss_violations={metrics.rss_violations}")
    click.echo(f"💾 Results written to {out}")


@main.command()
@click.argument("configs", nargs=-1, required=True)
@click.option("--out", type=click.Path(path_type=Path), default=DEFAULT_OUT / "compare", help="Output directory.")
@click.option("--no-plots", is_flag=True, help="Skip the overlay figure.")
@with_common_options
def compare(  # noqa: PLR0913
    configs: tuple[str, ...],
    out: Path,
    no_plots: bool,
    dt: float | None,
    seed: int | None,
    overrides: tuple[str, ...],
) -> None:
    """Run several scenarios and tabulate their metrics with pairwise percentage deltas."""
    if len(configs) < 2:
        fail("compare needs at least two scenarios", EXIT_INVALID)
    scenarios = [prepare(source, overrides, dt, seed)[1] for source in configs]
    click.echo(f"📊 Comparing {', '.join(s.name for s in scenarios)}")
    try:
        comparison, traces = compare_scenarios(scenarios)
    except Exception as e:
        traceback.print_exc()
        fail(f"Comparison failed: {e}", EXIT_RUNTIME)

    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(json.dumps(comparison.to_dict(), indent=2) + "\n")
    (out / "comparison.md").write_text(render_comparison(comparison, "markdown"))
    if not no_plots:
        trajectories = {}
        for label, trace in traces.items():
            ego = trace.for_vehicle(trace.ego_id)
            trajectories[label] = (np.array([r.x for r in ego]), np.array([r.y for r in ego]))
        save_xy_paths(
            trajectories,
            scenarios[0].lane,
            out / "compare_paths.svg",
            title="Ego lane-merge paths",
        )
    click.echo(render_comparison(comparison, "text"))
    click.echo(f"💾 Results written to {out}")


@main.command()
@click.argument("config")
@click.option("--param", "params", multiple=True, required=True, metavar="KEY=START:STOP:STEP", help="Sweep axis.")
@click.option("--out", type=click.Path(path_type=Path), default=DEFAULT_OUT / "sweep", help="Output directory.")
@with_common_options
def sweep(  # noqa: PLR0913
    config: str,
    params: tuple[str, ...],
    out: Path,
    dt: float | None,
    seed: int | None,
    overrides: tuple[str, ...],
) -> None:
    """Run the cartesian grid of parameter values and write one metrics row per point to sweep.csv."""
    try:
        grid = [parse_sweep_spec(spec) for spec in params]
    except ValueError as e:
        fail(str(e), EXIT_INVALID)
    document, _ = prepare(config, overrides, dt, seed)
    try:
        points = sweep_documents(document, grid)
    except ConfigValidationError as e:
        click.echo("❌ Invalid sweep points:", err=True)
        for error in e.errors:
            click.echo(f"  - {error}", err=True)
        sys.exit(EXIT_INVALID)

    click.echo(f"🔁 Sweeping {len(points)} point(s)")
    try:
        rows = run_sweep(points)
    except Exception as e:
        traceback.print_exc()
        fail(f"Sweep failed: {e}", EXIT_RUNTIME)

    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    click.echo(f"💾 {len(rows)} row(s) written to {out / 'sweep.csv'}")


@main.command()
@click.argument("configs", nargs=-1, required=True)
@with_common_options
def validate(configs: tuple[str, ...], dt: float | None, seed: int | None, overrides: tuple[str, ...]) -> None:
    """Check scenario documents without running them."""
    for source in configs:
        scenario = prepare(source, overrides, dt, seed)[1]
        click.echo(f"✅ {source}: {scenario.name} ({len(scenario.vehicles)} vehicles, {scenario.steps} steps)")


@main.command()
@click.argument("run_dir", type=click.Path(path_type=Path))
def plot(run_dir: Path) -> None:
    """Regenerate the SVG figures of an existing run directory."""
    try:
        scenario = validate_scenario(read_scenario(run_dir))
        records = read_trace(run_dir)
    except ConfigValidationError as e:
        fail(f"Stored scenario in {run_dir} is invalid: {'; '.join(e.errors)}", EXIT_INVALID)
    except (FileNotFoundError, ValueError) as e:
        fail(str(e), EXIT_INVALID)
    for path in render_plots(run_dir, scenario.lane, records, scenario.ego.vid):
        click.echo(f"🖼️  Wrote {path}")


if __name__ == "__main__":
    main()
