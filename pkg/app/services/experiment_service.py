"""
Seeded batch sweeps and policy comparison tables
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import pandas as pd

from app.schemas.policy import SequencingPolicy
from app.schemas.scenario import DEMAND_PRESETS, ScenarioConfig, SweepSpec
from app.services.metrics_service import SUMMARY_LABELS
from app.services.simulation_service import RunResult, Simulator

logger = logging.getLogger(__name__)

INDEX = ["scenario", "policy", "penetration", "horizon", "aggressiveness"]
METRICS = list(SUMMARY_LABELS.values())


@dataclass(frozen=True)
class SweepCell:
    """One (scenario, policy, penetration, horizon, aggressiveness) point of the grid"""
    scenario: str
    policy: SequencingPolicy
    penetration: float
    horizon: int
    aggressiveness: float
    config: ScenarioConfig

    @property
    def key(self) -> Dict[str, object]:
        return {
            "scenario": self.scenario,
            "policy": self.policy.value,
            "penetration": self.penetration,
            "horizon": self.horizon,
            "aggressiveness": self.aggressiveness,
        }

    def with_seed(self, seed: int) -> ScenarioConfig:
        return self.config.model_copy(update={"seed": seed})

    def directory(self, root: Path, seed: int) -> Path:
        return root / self.scenario / self.policy.value / f"{self.penetration:.2f}" / str(seed)


@dataclass
class SweepResult:
    runs: pd.DataFrame
    summary: pd.DataFrame
    table: pd.DataFrame
    normalized: pd.DataFrame
    failures: List[Dict[str, object]] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.failures else 0


def _override(base: ScenarioConfig, **changes) -> ScenarioConfig:
    data = base.model_dump()
    controller = dict(data["controller"])
    policy = dict(data["policy"])
    if "horizon" in changes:
        controller["horizon"] = changes.pop("horizon")
    if "policy" in changes:
        policy["policy"] = changes.pop("policy")
    data.update(changes, controller=controller, policy=policy)
    return ScenarioConfig.model_validate(data)


def expand_cells(spec: SweepSpec) -> List[SweepCell]:
    """Cartesian grid; the HDV-only policy contributes a single zero-penetration cell"""
    base = spec.base
    demands = spec.demands or [None]
    horizons = spec.horizons or [base.controller.horizon]
    aggressiveness = spec.aggressiveness or [base.hdv_aggressiveness]
    cells: List[SweepCell] = []
    for demand in demands:
        name = demand or base.name
        for horizon in horizons:
            for agg in aggressiveness:
                scenario = name
                if spec.horizons:
                    scenario += f"_h{horizon}"
                if spec.aggressiveness:
                    scenario += f"_a{agg:+.2f}"
                for policy in spec.policies:
                    penetrations = [0.0] if policy == SequencingPolicy.HDV else spec.penetrations
                    for penetration in penetrations:
                        changes = dict(
                            name=scenario,
                            cav_penetration=penetration,
                            hdv_aggressiveness=agg,
                            horizon=horizon,
                            policy=policy,
                        )
                        if demand is not None:
                            changes["arrival_rates"] = list(DEMAND_PRESETS[demand])
                        cells.append(SweepCell(scenario, policy, penetration, horizon, agg, _override(base, **changes)))
    return cells


def cell_seeds(spec: SweepSpec, cell_index: int) -> List[int]:
    """Seeds shared by every cell in controlled-comparison mode, offset per cell otherwise"""
    seeds = spec.expanded_seeds
    if spec.controlled_comparison:
        return seeds
    return [seed + 7919 * (cell_index + 1) for seed in seeds]


def run_cell(config: ScenarioConfig, output_dir: Optional[str]) -> Tuple[Dict[str, Dict[str, Optional[float]]], Dict[str, float]]:
    result = Simulator(config).run()
    if output_dir is not None:
        result.write(Path(output_dir))
    return result.summary, result.run_stats()


def run_rows(key: Dict[str, object], seed: int, summary, stats) -> List[Dict[str, object]]:
    rows = []
    for group, values in summary.items():
        row = {**key, "seed": seed, "group": group}
        row.update(values)
        row["infeasible_total"] = stats.get("infeasible", 0)
        row["avg_safe_sequences"] = stats.get("avg_safe_sequences", 0.0)
        rows.append(row)
    return rows


def run_sweep(
    spec: SweepSpec,
    workers: int = 1,
    on_result: Optional[Callable[[SweepCell, int, RunResult], None]] = None,
) -> SweepResult:
    """Run every (cell, seed); a failing run aborts its cell and is recorded in the failures list"""
    cells = expand_cells(spec)
    root = Path(spec.output_dir) if spec.output_dir else None
    jobs = [(cell, seed) for index, cell in enumerate(cells) for seed in cell_seeds(spec, index)]
    logger.info("sweep: %d cells, %d runs", len(cells), len(jobs))

    rows: List[Dict[str, object]] = []
    failures: List[Dict[str, object]] = []
    failed_cells = set()

    if workers > 1 and on_result is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_cell, cell.with_seed(seed), str(cell.directory(root, seed)) if root else None)
                for cell, seed in jobs
            ]
            outcomes = []
            for (cell, seed), future in zip(jobs, futures):
                try:
                    outcomes.append((cell, seed, future.result(), None))
                except Exception as exc:  # noqa: BLE001
                    outcomes.append((cell, seed, None, exc))
    else:
        outcomes = []
        for cell, seed in jobs:
            if id(cell) in failed_cells:
                continue
            try:
                result = Simulator(cell.with_seed(seed)).run()
                if root is not None:
                    result.write(cell.directory(root, seed))
                if on_result is not None:
                    on_result(cell, seed, result)
                outcomes.append((cell, seed, (result.summary, result.run_stats()), None))
            except Exception as exc:  # noqa: BLE001
                outcomes.append((cell, seed, None, exc))
                failed_cells.add(id(cell))

    for cell, seed, payload, error in outcomes:
        if error is not None:
            logger.warning("run failed for %s seed %d: %s", cell.key, seed, error)
            failures.append({**cell.key, "seed": seed, "error": f"{type(error).__name__}: {error}"})
            continue
        summary, stats = payload
        rows.extend(run_rows(cell.key, seed, summary, stats))

    failed_keys = {tuple(f[k] for k in INDEX) for f in failures}
    runs = pd.DataFrame(rows, columns=INDEX + ["seed", "group", "count"] + METRICS
                        + ["infeasible_total", "avg_safe_sequences"])
    numeric = ["count"] + METRICS
    runs[numeric] = runs[numeric].apply(pd.to_numeric, errors="coerce").astype(float)
    if failed_keys and not runs.empty:
        keep = [tuple(r) not in failed_keys for r in runs[INDEX].itertuples(index=False)]
        runs = runs[keep]

    summary = summarize_runs(runs)
    result = SweepResult(
        runs=runs,
        summary=summary,
        table=comparison_table(summary),
        normalized=normalized_table(summary),
        failures=failures,
    )
    if root is not None:
        write_tables(result, root)
    return result


def summarize_runs(runs: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation across seeds for every cell and vehicle group"""
    if runs.empty:
        return pd.DataFrame(columns=INDEX + ["group", "seeds"] + METRICS + [f"{m} (std)" for m in METRICS])
    grouped = runs.groupby(INDEX + ["group"], sort=True, dropna=False)
    means = grouped[METRICS].mean()
    stds = grouped[METRICS].std(ddof=1).add_suffix(" (std)")
    seeds = grouped["seed"].nunique().rename("seeds")
    return pd.concat([seeds, means, stds], axis=1).reset_index()


def comparison_table(summary: pd.DataFrame) -> pd.DataFrame:
    """Metric x group rows against penetration columns"""
    if summary.empty:
        return pd.DataFrame()
    long = summary.melt(
        id_vars=INDEX + ["group"], value_vars=METRICS, var_name="metric", value_name="value"
    )
    table = long.pivot_table(
        index=["scenario", "policy", "horizon", "aggressiveness", "metric", "group"],
        columns="penetration",
        values="value",
        aggfunc="first",
        dropna=False,
    )
    order = {label: k for k, label in enumerate(METRICS)}
    table = table.reset_index()
    table["_order"] = table["metric"].map(order)
    table = table.sort_values(["scenario", "policy", "horizon", "aggressiveness", "_order", "group"])
    return table.drop(columns="_order").reset_index(drop=True)


def normalized_table(summary: pd.DataFrame) -> pd.DataFrame:
    """All-vehicle means divided by the zero-penetration baseline of the same scenario"""
    if summary.empty:
        return pd.DataFrame()
    everyone = summary[summary["group"] == "all"]
    baseline = everyone[everyone["penetration"] == 0.0]
    if baseline.empty:
        return pd.DataFrame()
    keys = ["scenario", "horizon", "aggressiveness"]
    base = baseline.groupby(keys)[METRICS].first()
    rows = []
    for _, row in everyone.iterrows():
        key = tuple(row[k] for k in keys)
        if key not in base.index:
            continue
        reference = base.loc[key]
        ratios = {}
        for metric in METRICS:
            ref = reference[metric]
            ratios[metric] = row[metric] / ref if pd.notna(ref) and ref != 0 else None
        rows.append({**{k: row[k] for k in INDEX}, **ratios})
    return pd.DataFrame(rows, columns=INDEX + METRICS)


def write_tables(result: SweepResult, root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    result.runs.to_csv(root / "runs.csv", index=False)
    result.summary.to_csv(root / "summary.csv", index=False)
    result.table.to_csv(root / "table.csv", index=False)
    result.normalized.to_csv(root / "normalized.csv", index=False)
    (root / "failures.json").write_text(json.dumps(result.failures, indent=2, sort_keys=True), encoding="utf-8")
