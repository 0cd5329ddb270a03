"""
Time-stepped roundabout simulation with event-driven resequencing
"""
from __future__ import annotations

import logging
import math
import statistics
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Deque, Dict, List, Optional

import numpy as np

from app.schemas.policy import SequencingPolicy
from app.schemas.scenario import ScenarioConfig
from app.core.rng import SeededStreams
from app.services.controller_service import MpcController, MpcSolution, VehiclePlan, objective_terms
from app.services.geometry_service import RoundaboutLayout, SegmentRole
from app.services.metrics_service import MetricsLedger, MpCrossing, VehicleRecord
from app.services.sequencing_service import MergingGroup, Sequence, SequencingService
from app.services.vehicle_service import VehicleKind, VehicleService, VehicleState, WorldSnapshot
from app.utils.trace import RunTrace

logger = logging.getLogger(__name__)

TIME_EPS = 1e-9


class ResequenceEventKind(str, Enum):
    ENTERED = "vehicle-entered"
    EXITED = "vehicle-exited"
    CZ_CHANGED = "cz-changed"
    TIMEOUT = "timeout"
    REPLAN_INFEASIBLE = "replan-infeasible"


@dataclass(frozen=True)
class ResequenceEvent:
    kind: ResequenceEventKind
    time: float
    cz: int


@dataclass(frozen=True)
class Arrival:
    """A scheduled vehicle; drawn before the run so every policy sees the same traffic"""
    vehicle_id: int
    origin: int
    exit: int
    time: float
    kind: VehicleKind
    aggressiveness: Optional[float]

    def as_dict(self) -> Dict[str, object]:
        return {
            "id": self.vehicle_id,
            "origin": self.origin,
            "exit": self.exit,
            "time": round(self.time, 9),
            "kind": self.kind.value,
            "aggressiveness": self.aggressiveness,
        }


@dataclass
class RunResult:
    config: ScenarioConfig
    ledger: MetricsLedger
    trace: RunTrace
    arrivals: List[Arrival]
    steps: int
    wall_time: float = 0.0
    solve_times: List[float] = field(default_factory=list)

    @property
    def summary(self):
        return self.ledger.summary()

    def run_stats(self) -> Dict[str, float]:
        stats = self.ledger.run_stats()
        stats["steps"] = self.steps
        stats["wall_time"] = self.wall_time
        stats["median_solve_time"] = statistics.median(self.solve_times) if self.solve_times else 0.0
        return stats

    def write(self, directory: Path) -> Path:
        """ledger.csv, trace.jsonl and config.json under directory"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.ledger.write_csv(directory / "ledger.csv")
        self.trace.write(directory / "trace.jsonl")
        (directory / "config.json").write_text(self.config.model_dump_json(indent=2), encoding="utf-8")
        return directory


def generate_arrivals(config: ScenarioConfig, layout: RoundaboutLayout) -> List[Arrival]:
    """Poisson arrivals per origin; every arrival consumes the same four draws whatever its kind"""
    streams = SeededStreams(config.seed, layout.num_entries)
    penetration = config.effective_penetration
    drafts = []
    for origin, rate in enumerate(config.arrival_rates):
        if rate <= 0:
            continue
        rng = streams.stream(origin)
        exits = layout.valid_exits(origin, config.allow_u_turn)
        mean_gap = 3600.0 / rate
        t = 0.0
        while True:
            t += float(rng.exponential(mean_gap))
            kind_draw = float(rng.random())
            exit_index = int(rng.integers(len(exits)))
            spread_draw = float(rng.uniform(-1.0, 1.0))
            if t >= config.duration:
                break
            kind = VehicleKind.CAV if kind_draw < penetration else VehicleKind.HDV
            aggressiveness = None
            if kind == VehicleKind.HDV:
                raw = config.hdv_aggressiveness + config.aggressiveness_spread * spread_draw
                aggressiveness = float(np.clip(raw, -1.0, 1.0))
            drafts.append((t, origin, exits[exit_index], kind, aggressiveness))
    drafts.sort(key=lambda item: (item[0], item[1]))
    return [Arrival(k, origin, exit_, t, kind, agg) for k, (t, origin, exit_, kind, agg) in enumerate(drafts)]


class Simulator:
    """Single-writer world loop; sequencing and control read immutable snapshots"""

    def __init__(self, config: ScenarioConfig, arrivals: Optional[List[Arrival]] = None):
        self.config = config
        self.layout = RoundaboutLayout.from_config(config.layout)
        self.limits = config.limits
        self.time_step = config.time_step
        self.controller = MpcController(self.layout, self.limits, config.controller)
        self.ledger = MetricsLedger(self.limits, config.pet_threshold, config.pet_critical_below)
        self.trace = RunTrace(config.trace)
        self.arrivals = list(arrivals) if arrivals is not None else generate_arrivals(config, self.layout)
        self.queues: List[Deque[Arrival]] = [deque() for _ in range(self.layout.num_entries)]
        self._pending = deque(self.arrivals)
        self.vehicles: Dict[int, VehicleState] = {}
        self.plans: Dict[int, VehiclePlan] = {}
        self.sequences: Dict[int, Optional[Sequence]] = {}
        self.last_resequence: Dict[int, float] = {cz: -math.inf for cz in range(self.layout.num_entries)}
        self.events: Dict[int, List[ResequenceEvent]] = {}
        self.solve_times: List[float] = []
        self.step = 0

    @property
    def now(self) -> float:
        return self.step * self.time_step

    @property
    def controls_cavs(self) -> bool:
        return self.config.policy.policy != SequencingPolicy.HDV

    def snapshot(self) -> WorldSnapshot:
        ordered = {vid: self.vehicles[vid] for vid in sorted(self.vehicles)}
        return WorldSnapshot.capture(self.layout, self.step, self.now, ordered, self.plans)

    def _event(self, kind: ResequenceEventKind, cz: int) -> None:
        self.events.setdefault(cz, []).append(ResequenceEvent(kind, self.now, cz))

    def spawn_arrivals(self, t: float) -> List[VehicleState]:
        """Queue due arrivals and admit each origin's head when the rear-end condition holds at spawn"""
        while self._pending and self._pending[0].time <= t + TIME_EPS:
            arrival = self._pending.popleft()
            self.queues[arrival.origin].append(arrival)

        admitted: List[VehicleState] = []
        speed = self.config.spawn_speed
        for origin, queue in enumerate(self.queues):
            if not queue:
                continue
            entry_seg = 2 * origin + int(SegmentRole.ENTRY)
            on_entry = [s for s in self.vehicles.values() if s.segment == entry_seg]
            if on_entry:
                last = min(on_entry, key=lambda s: (s.x, -s.id))
                if last.x < self.limits.phi * speed + self.limits.delta:
                    continue
            arrival = queue.popleft()
            state = VehicleState.spawn(
                arrival.vehicle_id,
                arrival.kind,
                self.layout.route(arrival.origin, arrival.exit),
                t,
                speed,
                arrival.aggressiveness,
            )
            self.vehicles[state.id] = state
            self.ledger.register(VehicleRecord(
                vehicle_id=state.id,
                kind=state.kind.value,
                origin=arrival.origin,
                exit=arrival.exit,
                arrival_time=arrival.time,
                entry_time=t,
                aggressiveness=arrival.aggressiveness,
            ))
            self._event(ResequenceEventKind.ENTERED, origin)
            self.trace.emit("entered", t, id=state.id, origin=arrival.origin, exit=arrival.exit,
                            kind=state.kind.value, scheduled=round(arrival.time, 9))
            admitted.append(state)
        return admitted

    def _record_solve(self, solution: MpcSolution) -> None:
        self.solve_times.append(solution.solve_time)

    def resequence(self, cz: int, reasons: List[ResequenceEvent]) -> None:
        """Algorithm loop for one CZ: candidates, per-sequence evaluation, argmin, store plans"""
        world = self.snapshot()
        group = MergingGroup.from_world(world, cz)
        self.last_resequence[cz] = self.now
        if not group.cavs:
            self.sequences[cz] = None
            return

        policy = self.config.policy
        current = self.sequences.get(cz)
        candidates = SequencingService.candidates(group, policy, self.limits.phi, current.order if current else None)
        sequences = [SequencingService.assign_ip_im(order, group, world) for order in candidates.orders]
        fallback_order = SequencingService.fallback_sequence(group, policy.policy)
        fallback = SequencingService.assign_ip_im(fallback_order, group, world)

        evaluated = [0]

        def evaluator(seq: Sequence):
            evaluated[0] += 1
            evaluation = self.controller.evaluate_sequence(seq, group, world)
            for solution in evaluation.solutions.values():
                self._record_solve(solution)
            return evaluation

        selection = SequencingService.select_optimal(group, sequences, evaluator, fallback)
        self.ledger.record_sequencing(candidates.feasible_count, len(candidates.orders),
                                      evaluated[0] * len(group.cavs))
        if selection.all_infeasible:
            self.ledger.counters.all_infeasible_groups += 1
            for vid in selection.evaluation.infeasible_ids:
                self.ledger.record_infeasible(vid)

        for vid, solution in selection.evaluation.solutions.items():
            self.plans[vid] = MpcController.to_plan(world.vehicles[vid], solution, self.step)
        self.sequences[cz] = selection.sequence
        self.trace.emit(
            "resequence",
            self.now,
            cz=cz,
            reasons=sorted({r.kind.value for r in reasons}),
            order=list(selection.sequence.order),
            candidates=len(sequences),
            feasible=candidates.feasible_count,
            costs=list(selection.costs),
            all_infeasible=selection.all_infeasible,
        )

    def replan(self, cz: int) -> bool:
        """Re-solve every CAV in the CZ under the kept sequence; False when any solve fails"""
        sequence = self.sequences.get(cz)
        if sequence is None:
            return True
        world = self.snapshot()
        group_ids = MergingGroup.from_world(world, cz).ids
        if set(sequence.order) != set(group_ids):
            return False
        plans = dict(self.plans)
        fresh: Dict[int, VehiclePlan] = {}
        for vid in sequence.order:
            state = world.vehicles[vid]
            if not state.is_cav:
                continue
            view = WorldSnapshot.capture(self.layout, self.step, self.now, world.vehicles, plans)
            solution = self.controller.plan(state, sequence.assignment(vid), view)
            self._record_solve(solution)
            if not solution.feasible:
                self.trace.emit("replan-infeasible", self.now, cz=cz, id=vid)
                return False
            plans[vid] = fresh[vid] = MpcController.to_plan(state, solution, self.step)
        self.plans.update(fresh)
        return True

    def update_sequences(self) -> None:
        for cz in range(self.layout.num_entries):
            reasons = self.events.pop(cz, [])
            has_cav = any(s.is_cav and s.cz == cz for s in self.vehicles.values())
            if not has_cav:
                self.sequences[cz] = None
                continue
            if self.now - self.last_resequence[cz] >= self.config.resequence_timeout - TIME_EPS:
                reasons.append(ResequenceEvent(ResequenceEventKind.TIMEOUT, self.now, cz))
            if reasons:
                self.resequence(cz, reasons)
            elif self.config.controller.replan_every_step and not self.replan(cz):
                self.resequence(cz, [ResequenceEvent(ResequenceEventKind.REPLAN_INFEASIBLE, self.now, cz)])
        self.events.clear()

    def cav_control(self, state: VehicleState, world: WorldSnapshot) -> float:
        plan = self.plans.get(state.id)
        u = plan.control_at(self.step) if plan is not None else None
        if u is not None:
            return u
        sequence = self.sequences.get(state.cz)
        if sequence is not None and state.id in sequence.order:
            solution = self.controller.plan(state, sequence.assignment(state.id), world)
        else:
            solution = self.controller.fallback(state)
        self._record_solve(solution)
        self.plans[state.id] = MpcController.to_plan(state, solution, self.step)
        return solution.first_control

    def hdv_control(self, state: VehicleState, world: WorldSnapshot) -> float:
        leader = VehicleService.hdv_effective_leader(state, world, self.config.idm, self.limits)
        if leader is None:
            return VehicleService.hdv_acceleration(state, None, None, self.config.idm, self.limits)
        if leader.source == "physical" and leader.gap <= self.limits.delta:
            self.ledger.record_overlap(state.id)
        return VehicleService.hdv_acceleration(state, leader.gap, leader.speed, self.config.idm, self.limits)

    def record_step_metrics(self, state: VehicleState, u: float, world: WorldSnapshot) -> None:
        cfg = self.config.controller
        predecessor = VehicleService.physical_predecessor(state, world)
        self.ledger.record_unsafe(state.id, predecessor[1] if predecessor else None, state.v)
        self.ledger.record_hard_decel(state.id, u)
        kappa = self.layout.curvature_at(state.route, state.d)
        control, speed, comfort = objective_terms(
            np.array([u]), np.array([state.v]), np.array([kappa]), self.limits,
            cfg.lambda_speed, cfg.lambda_comfort, cfg.desired_speed, self.layout.kappa_max,
        )
        self.ledger.accumulate_efficiency(state.id, u, state.v, kappa, self.time_step,
                                          float(control[0] + speed[0] + comfort[0]))
        if VehicleService.speed_clamped(state, u, self.time_step, self.limits):
            self.ledger.record_clamp(state.id)

    def advance(self, controls: Dict[int, float]) -> None:
        """Step dynamics; log MP crossings, CZ changes and exits"""
        t = self.now
        moved: Dict[int, VehicleState] = {}
        for vid in sorted(self.vehicles):
            old = self.vehicles[vid]
            new = VehicleService.step_dynamics(old, controls[vid], self.time_step, self.layout, self.limits)
            chain = old.route.segment_chain
            crossed = list(range(old.route_index, new.route_index))
            if new.finished:
                crossed.append(new.route_index)

            to_mp = -old.x
            for index in crossed:
                seg = chain[index]
                to_mp += self.layout.segment_length(seg)
                crossing_time = t + to_mp / old.v
                departure = crossing_time + self.limits.delta / old.v
                cz = self.layout.cz_membership(seg)
                self.ledger.record_pet(cz, MpCrossing(vid, self.layout.segment(seg).role, crossing_time, departure))
                if new.finished and index == new.route_index:
                    self.ledger.finalize(vid, crossing_time, old.route.total_length)
                    self._event(ResequenceEventKind.EXITED, cz)
                    self.trace.emit("exited", t, id=vid, cz=cz, exit_time=round(crossing_time, 9))
                else:
                    self._event(ResequenceEventKind.CZ_CHANGED, cz)
                    self._event(ResequenceEventKind.CZ_CHANGED, self.layout.cz_membership(chain[index + 1]))
            if new.finished:
                self.plans.pop(vid, None)
            else:
                moved[vid] = new
        self.vehicles = moved

    def run(self) -> RunResult:
        started = time.perf_counter()
        steps = int(math.floor(self.config.duration / self.time_step + TIME_EPS))
        self.trace.emit("arrivals", 0.0, vehicles=[a.as_dict() for a in self.arrivals])
        logger.info("run %s policy=%s penetration=%.2f seed=%d steps=%d",
                    self.config.name, self.config.policy.policy.value,
                    self.config.effective_penetration, self.config.seed, steps)

        for step in range(steps):
            self.step = step
            self.spawn_arrivals(self.now)
            if self.controls_cavs:
                self.update_sequences()

            world = self.snapshot()
            controls: Dict[int, float] = {}
            for vid, state in world.vehicles.items():
                if state.is_cav:
                    controls[vid] = self.cav_control(state, world)
                else:
                    controls[vid] = self.hdv_control(state, world)
            for vid, state in world.vehicles.items():
                self.record_step_metrics(state, controls[vid], world)
            self.trace.states(self.now, [
                {"id": s.id, "seg": s.segment, "x": round(s.x, 9), "v": round(s.v, 9),
                 "u": round(controls[s.id], 9)}
                for s in world.vehicles.values()
            ])
            self.advance(controls)

        wall = time.perf_counter() - started
        logger.info("run %s finished in %.2fs: entered=%d exited=%d qp_reuse=%d/%d",
                    self.config.name, wall, self.ledger.counters.entered, self.ledger.counters.exited,
                    self.controller.workspaces.hits, self.controller.workspaces.hits + self.controller.workspaces.misses)
        return RunResult(
            config=self.config,
            ledger=self.ledger,
            trace=self.trace,
            arrivals=self.arrivals,
            steps=steps,
            wall_time=wall,
            solve_times=self.solve_times,
        )


def run(config: ScenarioConfig) -> RunResult:
    return Simulator(config).run()
