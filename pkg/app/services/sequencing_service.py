"""
Merging sequences per control zone: enumeration, safety filtering, i_p / i_m assignment and selection
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Dict, List, Mapping, Optional, Sequence as Seq, Tuple

from app.core.exceptions import ContractViolation
from app.schemas.policy import PolicyConfig, SafePolicyParams, SequencingPolicy
from app.services.geometry_service import SegmentRole
from app.services.vehicle_service import VehicleKind, VehicleState, WorldSnapshot

logger = logging.getLogger(__name__)

Order = Tuple[int, ...]


@dataclass(frozen=True)
class GroupMember:
    id: int
    c: SegmentRole
    kind: VehicleKind
    x: float
    v: float
    length: float
    aggressiveness: Optional[float] = None

    @property
    def is_cav(self) -> bool:
        return self.kind == VehicleKind.CAV


@dataclass(frozen=True)
class MergingGroup:
    """Vehicles inside one control zone, each segment ordered leader first"""
    cz: int
    curve: Tuple[GroupMember, ...] = ()
    entry: Tuple[GroupMember, ...] = ()

    def __post_init__(self):
        for lane in (self.curve, self.entry):
            if any(a.x < b.x for a, b in zip(lane, lane[1:])):
                raise ContractViolation(f"members of CZ {self.cz} are not ordered by decreasing x")

    @classmethod
    def from_world(cls, world: WorldSnapshot, cz: int) -> "MergingGroup":
        def lane(role: SegmentRole) -> Tuple[GroupMember, ...]:
            states = world.on_segment(2 * cz + int(role))
            return tuple(cls.member_of(s, world.layout.segment_length(s.segment)) for s in states)

        return cls(cz=cz, curve=lane(SegmentRole.CURVE), entry=lane(SegmentRole.ENTRY))

    @staticmethod
    def member_of(state: VehicleState, length: float) -> GroupMember:
        return GroupMember(
            id=state.id,
            c=state.c,
            kind=state.kind,
            x=state.x,
            v=state.v,
            length=length,
            aggressiveness=state.aggressiveness,
        )

    @property
    def members(self) -> Dict[int, GroupMember]:
        return {m.id: m for m in self.curve + self.entry}

    @property
    def cavs(self) -> List[GroupMember]:
        return [m for m in self.curve + self.entry if m.is_cav]

    @property
    def ids(self) -> frozenset:
        return frozenset(m.id for m in self.curve + self.entry)

    def __len__(self) -> int:
        return len(self.curve) + len(self.entry)


@dataclass(frozen=True)
class Assignment:
    ip: Optional[int] = None
    im: Optional[int] = None


@dataclass(frozen=True)
class Sequence:
    order: Order
    assignments: Mapping[int, Assignment] = field(default_factory=lambda: MappingProxyType({}))

    def assignment(self, vehicle_id: int) -> Assignment:
        return self.assignments.get(vehicle_id, Assignment())


@dataclass(frozen=True)
class SequenceEvaluation:
    """Cost of one candidate and the per-CAV solutions behind it"""
    sequence: Sequence
    cost: float
    solutions: Mapping[int, object]
    feasible: bool
    infeasible_ids: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Selection:
    sequence: Sequence
    evaluation: SequenceEvaluation
    costs: Tuple[float, ...]
    all_infeasible: bool


@dataclass(frozen=True)
class CandidateSet:
    feasible_count: int
    orders: Tuple[Order, ...]


SequenceFilter = Callable[[List[Order], MergingGroup], List[Order]]
Evaluator = Callable[[Sequence], SequenceEvaluation]


class SequencingService:
    """Pure functions over merging-group snapshots"""

    @staticmethod
    def enumerate_feasible(group: MergingGroup) -> List[Order]:
        """All interleavings of the two lanes; curve-first comes out first"""
        curve = [m.id for m in group.curve]
        entry = [m.id for m in group.entry]
        n = len(curve) + len(entry)
        orders: List[Order] = []
        for slots in itertools.combinations(range(n), len(curve)):
            taken = set(slots)
            curve_iter, entry_iter = iter(curve), iter(entry)
            orders.append(tuple(next(curve_iter) if k in taken else next(entry_iter) for k in range(n)))
        return orders

    @staticmethod
    def merge_ahead_permitted(i: GroupMember, j: GroupMember, params: SafePolicyParams, phi: float) -> bool:
        """Whether CAV i may pass the MP ahead of HDV j from the other segment"""
        if i.c == j.c:
            raise ContractViolation(f"vehicles {i.id} and {j.id} share a segment")
        aggressiveness = j.aggressiveness if j.aggressiveness is not None else 0.0
        z_ji = (j.length - j.x) - (i.length - i.x)
        return z_ji - phi * (j.v - i.v * i.x / i.length) >= params.threshold(aggressiveness)

    @staticmethod
    def cross_follower(order: Seq[int], position: int, group: MergingGroup) -> Optional[int]:
        """First vehicle after order[position] coming from the other segment (i_m^-)"""
        members = group.members
        role = members[order[position]].c
        for other in order[position + 1:]:
            if members[other].c != role:
                return other
        return None

    @staticmethod
    def filter_safe(
        sequences: List[Order],
        group: MergingGroup,
        params: SafePolicyParams,
        phi: float,
    ) -> List[Order]:
        """Drop orders where a CAV merges directly ahead of an HDV without the required merge-ahead margin"""
        members = group.members
        kept: List[Order] = []
        for order in sequences:
            safe = True
            for position, vid in enumerate(order):
                i = members[vid]
                if not i.is_cav:
                    continue
                follower = SequencingService.cross_follower(order, position, group)
                if follower is None or members[follower].is_cav:
                    continue
                if not SequencingService.merge_ahead_permitted(i, members[follower], params, phi):
                    safe = False
                    break
            if safe:
                kept.append(order)
        return kept

    @staticmethod
    def filter_baseline(sequences: List[Order], group: MergingGroup) -> List[Order]:
        """Entry-road CAVs after every curve-road HDV"""
        curve_hdvs = [m.id for m in group.curve if not m.is_cav]
        entry_cavs = [m.id for m in group.entry if m.is_cav]
        if not curve_hdvs or not entry_cavs:
            return list(sequences)
        kept = []
        for order in sequences:
            position = {vid: k for k, vid in enumerate(order)}
            last_hdv = max(position[h] for h in curve_hdvs)
            if all(position[c] > last_hdv for c in entry_cavs):
                kept.append(order)
        return kept

    @staticmethod
    def fallback_sequence(group: MergingGroup, policy: SequencingPolicy = SequencingPolicy.SS) -> Order:
        """Order that every filter accepts: HDV heads first, otherwise the curve head"""
        curve, entry = list(group.curve), list(group.entry)
        if policy != SequencingPolicy.SS:
            return tuple(m.id for m in curve + entry)
        order: List[int] = []
        while curve and entry:
            if not curve[0].is_cav:
                order.append(curve.pop(0).id)
            elif not entry[0].is_cav:
                order.append(entry.pop(0).id)
            else:
                order.append(curve.pop(0).id)
        order.extend(m.id for m in curve + entry)
        return tuple(order)

    @staticmethod
    def swap_distance(order: Order, reference: Optional[Order]) -> int:
        """Kendall-tau distance over the vehicles both orders share"""
        if not reference:
            return 0
        rank = {vid: k for k, vid in enumerate(reference)}
        shared = [rank[vid] for vid in order if vid in rank]
        return sum(1 for a, b in itertools.combinations(shared, 2) if a > b)

    @staticmethod
    def prune(orders: List[Order], cap: int, current: Optional[Order], keep: Optional[Order] = None) -> List[Order]:
        """Keep at most cap orders closest to the current one, preserving enumeration order"""
        if len(orders) <= cap:
            return orders
        ranked = sorted(
            range(len(orders)),
            key=lambda k: (orders[k] != keep, SequencingService.swap_distance(orders[k], current), k),
        )
        chosen = sorted(ranked[:cap])
        logger.debug("pruned %d candidate sequences to %d", len(orders), cap)
        return [orders[k] for k in chosen]

    @staticmethod
    def candidates(
        group: MergingGroup,
        policy: PolicyConfig,
        phi: float,
        current: Optional[Order] = None,
    ) -> CandidateSet:
        """Enumerate, filter per policy and cap; the fallback order is always a candidate"""
        feasible = SequencingService.enumerate_feasible(group)
        filtered = baseline_policy_switch(policy.policy, policy.safe, phi)(feasible, group)
        fallback = SequencingService.fallback_sequence(group, policy.policy)
        if fallback not in filtered:
            filtered = [o for o in feasible if o == fallback or o in filtered]
        pruned = SequencingService.prune(filtered, policy.max_sequences, current, keep=fallback)
        return CandidateSet(feasible_count=len(feasible), orders=tuple(pruned))

    @staticmethod
    def assign_ip_im(order: Order, group: MergingGroup, world: WorldSnapshot) -> Sequence:
        """i_m from the other lane, i_p from the own lane or the next occupied segment downstream"""
        members = group.members
        assignments: Dict[int, Assignment] = {}
        last_seen: Dict[SegmentRole, int] = {}
        for vid in order:
            role = members[vid].c
            other = SegmentRole.ENTRY if role == SegmentRole.CURVE else SegmentRole.CURVE
            ip = last_seen.get(role)
            if ip is None:
                ip = SequencingService.downstream_predecessor(world.vehicles[vid], world)
            assignments[vid] = Assignment(ip=ip, im=last_seen.get(other))
            last_seen[role] = vid
        return Sequence(order=tuple(order), assignments=MappingProxyType(assignments))

    @staticmethod
    def downstream_predecessor(state: VehicleState, world: WorldSnapshot) -> Optional[int]:
        """Last vehicle on the first occupied segment after the current one on the route"""
        if state.in_final_cz:
            return None
        chain = state.route.segment_chain
        for index in range(state.route_index + 1, len(chain)):
            occupants = world.on_segment(chain[index])
            if occupants:
                return occupants[-1].id
        return None

    @staticmethod
    def select_optimal(
        group: MergingGroup,
        candidates: List[Sequence],
        evaluator: Evaluator,
        fallback: Optional[Sequence] = None,
    ) -> Selection:
        """Argmin of the summed CAV horizon cost; ties go to the earliest candidate"""
        if not candidates:
            raise ContractViolation(f"no candidate sequences for CZ {group.cz}")
        evaluations = [evaluator(seq) for seq in candidates]
        costs = tuple(e.cost for e in evaluations)

        best: Optional[SequenceEvaluation] = None
        for evaluation in evaluations:
            if evaluation.feasible and (best is None or evaluation.cost < best.cost):
                best = evaluation
        if best is not None:
            return Selection(best.sequence, best, costs, all_infeasible=False)

        fallback = fallback or candidates[-1]
        chosen = next((e for e in evaluations if e.sequence.order == fallback.order), None)
        if chosen is None:
            chosen = evaluator(fallback)
        logger.warning("all %d sequences infeasible in CZ %d; using fallback order", len(candidates), group.cz)
        return Selection(chosen.sequence, chosen, costs, all_infeasible=True)


def baseline_policy_switch(policy: SequencingPolicy, params: SafePolicyParams, phi: float) -> SequenceFilter:
    """Sequence filter for a policy: merge-ahead margin screening for SS, entry CAVs yield for BS"""
    if policy == SequencingPolicy.BS:
        return SequencingService.filter_baseline
    if policy == SequencingPolicy.SS:
        return lambda sequences, group: SequencingService.filter_safe(sequences, group, params, phi)
    return lambda sequences, group: list(sequences)
