"""
Command-line front end: single runs, seeded sweeps and the scenario schema
"""
import json
import logging
from pathlib import Path
from typing import List, Optional

import click
from pydantic import ValidationError

from app.core.config import settings
from app.core.database import init_db, session_scope
from app.core.exceptions import ScenarioConfigError, SimulationError
from app.core.logging import setup_logging
from app.schemas.policy import SequencingPolicy
from app.schemas.scenario import DEMAND_PRESETS, ScenarioConfig, SweepSpec, TraceMode
from app.services.experiment_service import SweepCell, run_sweep
from app.services.run_service import RunService
from app.services.simulation_service import RunResult, Simulator

logger = logging.getLogger(__name__)

PENETRATION_SWEEP = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]


def load_scenario(path: Optional[str], demand: Optional[str]) -> ScenarioConfig:
    """Scenario from a JSON document, a demand preset, or the defaults"""
    try:
        if path is not None:
            config = ScenarioConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))
            if demand is not None:
                config = config.model_copy(update={"name": demand, "arrival_rates": list(DEMAND_PRESETS[demand])})
            return config
        if demand is not None:
            return ScenarioConfig.preset(demand)
        return ScenarioConfig()
    except (OSError, ValidationError) as e:
        raise ScenarioConfigError(f"cannot load scenario {path or demand}: {e}") from e


def parse_penetrations(value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    if value.strip().lower() == "sweep":
        return list(PENETRATION_SWEEP)
    return [float(v) for v in value.split(",") if v.strip()]


def parse_ints(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    return [int(v) for v in value.split(",") if v.strip()]


def apply_overrides(config: ScenarioConfig, policy, duration, horizon, trace) -> ScenarioConfig:
    data = config.model_dump()
    if policy is not None:
        data["policy"]["policy"] = policy
    if duration is not None:
        data["duration"] = duration
    if horizon is not None:
        data["controller"]["horizon"] = horizon
    if trace is not None:
        data["trace"] = trace
    return ScenarioConfig.model_validate(data)


scenario_option = click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False),
                               help="Scenario JSON document")
demand_option = click.option("--demand", type=click.Choice(sorted(DEMAND_PRESETS)), help="Demand preset")
duration_option = click.option("--duration", type=float, help="Simulated seconds")
trace_option = click.option("--trace", type=click.Choice([m.value for m in TraceMode]), help="Trace detail")
out_option = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                          help="Output root (defaults to OUTPUT_DIR)")
record_option = click.option("--record/--no-record", default=False, help="Store runs in the run registry")


@click.group()
@click.option("--log-level", default=None, help="Overrides LOG_LEVEL")
def cli(log_level):
    """Roundabout Safe Sequencing simulator"""
    setup_logging(log_level)


@cli.command("run")
@scenario_option
@demand_option
@click.option("--policy", type=click.Choice([p.value for p in SequencingPolicy]), default=None)
@click.option("--penetration", type=float, default=None)
@click.option("--seed", type=int, default=None)
@duration_option
@click.option("--horizon", type=int, default=None)
@trace_option
@out_option
@record_option
def run_command(scenario_path, demand, policy, penetration, seed, duration, horizon, trace, out_dir, record):
    """Run a single seeded scenario"""
    try:
        config = apply_overrides(load_scenario(scenario_path, demand), policy, duration, horizon, trace)
        updates = {}
        if penetration is not None:
            updates["cav_penetration"] = penetration
        if seed is not None:
            updates["seed"] = seed
        config = ScenarioConfig.model_validate({**config.model_dump(), **updates})
        result = Simulator(config).run()
    except (SimulationError, ValidationError) as e:
        raise click.ClickException(str(e))

    cell = SweepCell(config.name, config.policy.policy, config.effective_penetration,
                     config.controller.horizon, config.hdv_aggressiveness, config)
    directory = result.write(cell.directory(Path(out_dir or settings.OUTPUT_DIR), config.seed))
    if record:
        _record(result, str(directory))
    click.echo(json.dumps({"output": str(directory), "summary": result.summary}, indent=2, sort_keys=True))


@cli.command("sweep")
@scenario_option
@click.option("--demand", "demands", multiple=True, type=click.Choice(sorted(DEMAND_PRESETS)),
              help="Demand presets to sweep (repeatable)")
@click.option("--policy", "policies", multiple=True, type=click.Choice([p.value for p in SequencingPolicy]),
              help="Policies to compare (repeatable)")
@click.option("--penetration", default="sweep", show_default=True, help="'sweep' or comma-separated rates")
@click.option("--seed", "seeds", default="0", show_default=True, help="Comma-separated seeds")
@click.option("--replications", type=int, default=1, show_default=True)
@duration_option
@click.option("--horizon", "horizons", multiple=True, type=int, help="Horizon lengths to sweep (repeatable)")
@click.option("--aggressiveness", multiple=True, type=float, help="Mean HDV aggressiveness values (repeatable)")
@click.option("--uncontrolled", is_flag=True, help="Draw different traffic for every cell")
@trace_option
@out_option
@click.option("--workers", type=int, default=None, help="Parallel runs (defaults to SWEEP_WORKERS)")
@record_option
@click.pass_context
def sweep_command(ctx, scenario_path, demands, policies, penetration, seeds, replications, duration, horizons,
                  aggressiveness, uncontrolled, trace, out_dir, workers, record):
    """Run a grid of policies x penetrations x seeds and write comparison tables"""
    try:
        base = apply_overrides(load_scenario(scenario_path, None), None, duration, None, trace)
        spec = SweepSpec(
            base=base,
            policies=[SequencingPolicy(p) for p in policies] or [SequencingPolicy.SS],
            demands=list(demands),
            penetrations=parse_penetrations(penetration),
            horizons=list(horizons),
            aggressiveness=list(aggressiveness),
            seeds=parse_ints(seeds),
            replications=replications,
            controlled_comparison=not uncontrolled,
            output_dir=out_dir or settings.OUTPUT_DIR,
        )
    except (SimulationError, ValidationError, ValueError) as e:
        raise click.ClickException(str(e))

    on_result = None
    if record:
        init_db()

        def on_result(cell: SweepCell, seed: int, result: RunResult) -> None:
            _record(result, str(cell.directory(Path(spec.output_dir), seed)))

    result = run_sweep(spec, workers=workers or settings.SWEEP_WORKERS, on_result=on_result)
    click.echo(result.table.to_string(index=False))
    if result.failures:
        click.echo(f"{len(result.failures)} run(s) failed; see failures.json", err=True)
    ctx.exit(result.exit_code)


@cli.command("schema")
def schema_command():
    """Print the scenario JSON schema"""
    click.echo(json.dumps(ScenarioConfig.model_json_schema(), indent=2, sort_keys=True))


def _record(result: RunResult, output_dir: str) -> None:
    init_db()
    with session_scope() as db:
        run = RunService.record_run(db, result, output_dir)
        logger.info("recorded run %d", run.id)


if __name__ == "__main__":
    cli()
