"""
Tests for sweep expansion, sweep outputs and the command-line front end
"""
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from app.cli import cli, parse_penetrations
from app.core.exceptions import SimulationError
from app.schemas.policy import SequencingPolicy
from app.schemas.scenario import ScenarioConfig, SweepSpec
from app.services import experiment_service
from app.services.experiment_service import METRICS, cell_seeds, expand_cells, run_sweep
from app.services.simulation_service import Simulator


def small_spec(tmp_path, **overrides) -> SweepSpec:
    data = dict(
        base=ScenarioConfig(duration=15.0),
        policies=[SequencingPolicy.SS, SequencingPolicy.HDV],
        penetrations=[0.0, 1.0],
        seeds=[1, 2],
        output_dir=str(tmp_path / "sweep"),
    )
    data.update(overrides)
    return SweepSpec(**data)


# ============================================================================
# EXPANSION
# ============================================================================

def test_hdv_policy_gets_a_single_cell():
    spec = SweepSpec(policies=[SequencingPolicy.SS, SequencingPolicy.BS, SequencingPolicy.HDV],
                     penetrations=[0.0, 0.5, 1.0])
    cells = expand_cells(spec)
    assert len(cells) == 7
    hdv_cells = [c for c in cells if c.policy == SequencingPolicy.HDV]
    assert [c.penetration for c in hdv_cells] == [0.0]
    assert all(c.config.policy.policy == c.policy for c in cells)


def test_demand_and_horizon_axes():
    spec = SweepSpec(demands=["balanced", "heavy"], horizons=[5, 10], penetrations=[0.5])
    cells = expand_cells(spec)
    assert [c.scenario for c in cells] == ["balanced_h5", "balanced_h10", "heavy_h5", "heavy_h10"]
    heavy = cells[2]
    assert heavy.config.arrival_rates == [576.0, 576.0, 576.0]
    assert heavy.config.controller.horizon == 5
    assert heavy.config.name == "heavy_h5"


def test_aggressiveness_axis_names_cells():
    cells = expand_cells(SweepSpec(aggressiveness=[-0.5, 0.5], penetrations=[0.0]))
    assert [c.scenario for c in cells] == ["balanced_a-0.50", "balanced_a+0.50"]
    assert cells[1].config.hdv_aggressiveness == 0.5


def test_controlled_comparison_shares_seeds():
    spec = SweepSpec(seeds=[3], replications=2, penetrations=[0.0, 1.0])
    assert cell_seeds(spec, 0) == cell_seeds(spec, 1) == [3, 1003]
    uncontrolled = spec.model_copy(update={"controlled_comparison": False})
    assert cell_seeds(uncontrolled, 0) != cell_seeds(uncontrolled, 1)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(penetrations=[1.5])
    with pytest.raises(ValueError):
        SweepSpec(demands=["rush-hour"])
    with pytest.raises(ValueError):
        SweepSpec(seeds=[])


def test_parse_penetrations():
    assert parse_penetrations("sweep") == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    assert parse_penetrations("0, 0.5") == [0.0, 0.5]
    assert parse_penetrations(None) is None


# ============================================================================
# SWEEPS
# ============================================================================

def test_small_sweep_writes_tables(tmp_path):
    result = run_sweep(small_spec(tmp_path))
    root = tmp_path / "sweep"
    assert result.failures == []
    assert result.exit_code == 0
    for name in ("runs.csv", "summary.csv", "table.csv", "normalized.csv", "failures.json"):
        assert (root / name).exists()
    assert (root / "balanced" / "ss" / "1.00" / "2" / "ledger.csv").exists()
    assert (root / "balanced" / "hdv" / "0.00" / "1" / "trace.jsonl").exists()

    assert len(result.runs) == 3 * 2 * 3
    assert len(result.summary) == 3 * 3
    assert set(result.summary["seeds"]) == {2}
    hdv_cav = result.summary[(result.summary["policy"] == "hdv") & (result.summary["group"] == "cav")]
    assert hdv_cav[METRICS].isna().all().all()
    assert {0.0, 1.0} <= set(result.table.columns)


def test_zero_penetration_cells_normalize_to_one(tmp_path):
    result = run_sweep(small_spec(tmp_path, policies=[SequencingPolicy.SS]))
    baseline = result.normalized[result.normalized["penetration"] == 0.0]
    assert len(baseline) == 1
    for metric in METRICS:
        value = baseline[metric].iloc[0]
        assert pd.isna(value) or value == pytest.approx(1.0)


def test_failed_cell_is_reported(tmp_path, monkeypatch):
    class Exploding(Simulator):
        def run(self):
            if self.config.cav_penetration == 1.0:
                raise SimulationError("solver blew up")
            return super().run()

    monkeypatch.setattr(experiment_service, "Simulator", Exploding)
    result = run_sweep(small_spec(tmp_path, policies=[SequencingPolicy.SS]))
    assert result.exit_code == 1
    assert len(result.failures) == 1
    assert result.failures[0]["penetration"] == 1.0
    assert "solver blew up" in result.failures[0]["error"]
    assert set(result.runs["penetration"]) == {0.0}
    saved = json.loads((tmp_path / "sweep" / "failures.json").read_text())
    assert saved == result.failures


# ============================================================================
# CLI
# ============================================================================

def test_cli_schema():
    result = CliRunner().invoke(cli, ["schema"])
    assert result.exit_code == 0
    schema = json.loads(result.stdout)
    assert "arrival_rates" in schema["properties"]


def test_cli_single_run(tmp_path):
    result = CliRunner().invoke(cli, [
        "run", "--demand", "unbalanced", "--duration", "3", "--seed", "2", "--penetration", "0.5",
        "--out", str(tmp_path),
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert set(payload["summary"]) == {"cav", "hdv", "all"}
    assert (tmp_path / "unbalanced" / "ss" / "0.50" / "2" / "config.json").exists()


def test_cli_rejects_unknown_policy():
    result = CliRunner().invoke(cli, ["run", "--policy", "fifo"])
    assert result.exit_code == 2


def test_cli_scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"name": "custom", "arrival_rates": [100.0], "duration": 2.0}))
    result = CliRunner().invoke(cli, ["run", "--scenario", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "custom" / "ss" / "0.50" / "0" / "ledger.csv").exists()


def test_cli_invalid_scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"arrival_rates": [100.0, 200.0]}))
    result = CliRunner().invoke(cli, ["run", "--scenario", str(path)])
    assert result.exit_code == 1


def test_cli_sweep(tmp_path):
    result = CliRunner().invoke(cli, [
        "sweep", "--policy", "ss", "--policy", "hdv", "--penetration", "0,1", "--seed", "1",
        "--duration", "3", "--out", str(tmp_path),
    ])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "summary.csv").exists()
