"""
Per-vehicle and per-run metrics: efficiency integrals, safety counters and policy comparison aggregates
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

from app.schemas.vehicle import VehicleLimits
from app.services.geometry_service import SegmentRole

logger = logging.getLogger(__name__)

HARD_DECEL_EPS = 1e-9

SUMMARY_LABELS = {
    "avg_objective": "Avg. Obj.",
    "energy": "Avg. Energy",
    "travel_time": "Avg. Time",
    "mean_speed": "Avg. Speed",
    "discomfort": "Avg. Discomfort",
    "unsafe_count": "Avg. Unsafe Cnt.",
    "hard_decel_count": "Avg. Hard Deceleration Cnt.",
    "pet_critical_count": "Avg. PET Critical Cnt.",
    "infeasible_count": "Avg. Infeasible Cnt.",
}
GROUPS = ("cav", "hdv", "all")


@dataclass
class VehicleRecord:
    vehicle_id: int
    kind: str
    origin: int
    exit: int
    arrival_time: float
    entry_time: float
    aggressiveness: Optional[float] = None
    exit_time: Optional[float] = None
    distance: float = 0.0
    energy: float = 0.0
    discomfort: float = 0.0
    objective_sum: float = 0.0
    steps: int = 0
    unsafe_count: int = 0
    unsafe_steps: int = 0
    hard_decel_count: int = 0
    hard_decel_steps: int = 0
    pet_critical_count: int = 0
    infeasible_count: int = 0
    clamp_count: int = 0
    overlap_count: int = 0
    in_unsafe: bool = field(default=False, repr=False)
    in_hard_decel: bool = field(default=False, repr=False)

    @property
    def completed(self) -> bool:
        return self.exit_time is not None

    @property
    def travel_time(self) -> Optional[float]:
        if self.exit_time is None:
            return None
        return self.exit_time - self.entry_time

    @property
    def mean_speed(self) -> Optional[float]:
        travel = self.travel_time
        if not travel:
            return None
        return self.distance / travel

    @property
    def avg_objective(self) -> Optional[float]:
        return self.objective_sum / self.steps if self.steps else None

    def row(self) -> Dict[str, object]:
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.repr}
        data["travel_time"] = self.travel_time
        data["mean_speed"] = self.mean_speed
        data["avg_objective"] = self.avg_objective
        return data


@dataclass(frozen=True)
class MpCrossing:
    vehicle_id: int
    role: SegmentRole
    arrival: float
    departure: float


@dataclass
class RunCounters:
    pet_critical: int = 0
    pet_pairs: int = 0
    infeasible: int = 0
    all_infeasible_groups: int = 0
    resequencings: int = 0
    solves: int = 0
    feasible_sequences: int = 0
    safe_sequences: int = 0
    overlaps: int = 0
    clamps: int = 0
    entered: int = 0
    exited: int = 0


class MetricsLedger:
    """Accumulates metrics for one run; aggregates cover completed vehicles only"""

    def __init__(self, limits: VehicleLimits, pet_threshold: float = 1.0, pet_critical_below: bool = True):
        self.limits = limits
        self.pet_threshold = pet_threshold
        self.pet_critical_below = pet_critical_below
        self.records: Dict[int, VehicleRecord] = {}
        self.counters = RunCounters()
        self.last_crossing: Dict[int, MpCrossing] = {}

    def register(self, record: VehicleRecord) -> VehicleRecord:
        self.records[record.vehicle_id] = record
        self.counters.entered += 1
        return record

    def record_unsafe(self, vehicle_id: int, gap: Optional[float], speed: float) -> bool:
        """Rising-edge count of z < phi v + delta against the physical predecessor"""
        record = self.records[vehicle_id]
        violated = gap is not None and gap < self.limits.phi * speed + self.limits.delta
        if violated:
            record.unsafe_steps += 1
            if not record.in_unsafe:
                record.unsafe_count += 1
        record.in_unsafe = violated
        return violated

    def record_hard_decel(self, vehicle_id: int, u_applied: float) -> bool:
        record = self.records[vehicle_id]
        hard = u_applied <= self.limits.u_min + HARD_DECEL_EPS
        if hard:
            record.hard_decel_steps += 1
            if not record.in_hard_decel:
                record.hard_decel_count += 1
        record.in_hard_decel = hard
        return hard

    def is_critical(self, pet: float) -> bool:
        if self.pet_critical_below:
            return pet < self.pet_threshold
        return pet > self.pet_threshold

    def record_pet(self, mp: int, crossing: MpCrossing) -> Optional[float]:
        """PET against the previous crossing at the same MP when it came from the other segment"""
        previous = self.last_crossing.get(mp)
        self.last_crossing[mp] = crossing
        if previous is None or previous.role == crossing.role:
            return None
        pet = crossing.arrival - previous.departure
        self.counters.pet_pairs += 1
        if self.is_critical(pet):
            self.counters.pet_critical += 1
            follower = self.records.get(crossing.vehicle_id)
            if follower is not None:
                follower.pet_critical_count += 1
        return pet

    def accumulate_efficiency(self, vehicle_id: int, u: float, v: float, kappa: float, time_step: float,
                              objective: float = 0.0) -> None:
        record = self.records[vehicle_id]
        record.energy += 0.5 * u ** 2 * time_step
        record.discomfort += kappa * v ** 2 * time_step
        record.objective_sum += objective
        record.steps += 1

    def record_infeasible(self, vehicle_id: Optional[int] = None) -> None:
        self.counters.infeasible += 1
        if vehicle_id is not None and vehicle_id in self.records:
            self.records[vehicle_id].infeasible_count += 1

    def record_clamp(self, vehicle_id: int) -> None:
        self.counters.clamps += 1
        self.records[vehicle_id].clamp_count += 1

    def record_overlap(self, vehicle_id: int) -> None:
        self.counters.overlaps += 1
        self.records[vehicle_id].overlap_count += 1

    def record_sequencing(self, feasible: int, safe: int, solves: int) -> None:
        self.counters.resequencings += 1
        self.counters.feasible_sequences += feasible
        self.counters.safe_sequences += safe
        self.counters.solves += solves

    def finalize(self, vehicle_id: int, exit_time: float, distance: float) -> None:
        record = self.records[vehicle_id]
        record.exit_time = exit_time
        record.distance = distance
        self.counters.exited += 1

    def to_frame(self) -> pd.DataFrame:
        rows = [self.records[k].row() for k in sorted(self.records)]
        columns = [f.name for f in fields(VehicleRecord) if f.repr] + ["travel_time", "mean_speed", "avg_objective"]
        return pd.DataFrame(rows, columns=columns)

    def write_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False)

    def summary(self) -> Dict[str, Dict[str, Optional[float]]]:
        """Means of the per-vehicle metrics over completed vehicles, split by kind"""
        return summarize_frame(self.to_frame())

    def run_stats(self) -> Dict[str, float]:
        stats = asdict(self.counters)
        resequencings = self.counters.resequencings
        stats["avg_feasible_sequences"] = self.counters.feasible_sequences / resequencings if resequencings else 0.0
        stats["avg_safe_sequences"] = self.counters.safe_sequences / resequencings if resequencings else 0.0
        stats["avg_solves_per_resequencing"] = self.counters.solves / resequencings if resequencings else 0.0
        return stats


def summarize_frame(frame: pd.DataFrame) -> Dict[str, Dict[str, Optional[float]]]:
    done = frame[frame["exit_time"].notna()] if not frame.empty else frame
    summary: Dict[str, Dict[str, Optional[float]]] = {}
    for group in GROUPS:
        subset = done if group == "all" else done[done["kind"] == group] if not done.empty else done
        values: Dict[str, Optional[float]] = {"count": float(len(subset))}
        for column, label in SUMMARY_LABELS.items():
            if subset.empty:
                values[label] = None
                continue
            mean = pd.to_numeric(subset[column], errors="coerce").mean()
            values[label] = None if math.isnan(mean) else float(mean)
        summary[group] = values
    return summary
