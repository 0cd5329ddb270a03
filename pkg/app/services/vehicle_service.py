"""
Vehicle state, discrete double-integrator dynamics and the human driver model
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Any, List, Mapping, Optional, Tuple

from app.core.exceptions import ContractViolation
from app.schemas.vehicle import IdmParams, VehicleLimits
from app.services.geometry_service import RoundaboutLayout, RouteSpec, SegmentRole

logger = logging.getLogger(__name__)

STOPPED_SPEED = 0.1
CLAMP_EPS = 1e-12


class VehicleKind(str, Enum):
    CAV = "cav"
    HDV = "hdv"


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one vehicle; x is measured from the current segment origin"""
    id: int
    kind: VehicleKind
    route: RouteSpec
    route_index: int
    x: float
    v: float
    d: float
    t0: float
    aggressiveness: Optional[float] = None
    finished: bool = False

    def __post_init__(self):
        if (self.kind == VehicleKind.HDV) != (self.aggressiveness is not None):
            raise ContractViolation("aggressiveness is present exactly for human-driven vehicles")

    @classmethod
    def spawn(
        cls,
        vehicle_id: int,
        kind: VehicleKind,
        route: RouteSpec,
        t0: float,
        speed: float,
        aggressiveness: Optional[float] = None,
    ) -> "VehicleState":
        return cls(
            id=vehicle_id,
            kind=kind,
            route=route,
            route_index=0,
            x=0.0,
            v=speed,
            d=0.0,
            t0=t0,
            aggressiveness=aggressiveness if kind == VehicleKind.HDV else None,
        )

    @property
    def segment(self) -> int:
        return self.route.segment_chain[self.route_index]

    @property
    def cz(self) -> int:
        return self.segment // 2

    @property
    def c(self) -> SegmentRole:
        return SegmentRole(self.segment % 2)

    @property
    def is_cav(self) -> bool:
        return self.kind == VehicleKind.CAV

    @property
    def in_final_cz(self) -> bool:
        return self.route.is_last(self.route_index)


@dataclass(frozen=True)
class WorldSnapshot:
    """Read-only view of the simulation at one step"""
    layout: RoundaboutLayout
    step: int
    time: float
    vehicles: Mapping[int, VehicleState]
    plans: Mapping[int, Any] = field(default_factory=lambda: MappingProxyType({}))

    @classmethod
    def capture(cls, layout, step, time, vehicles, plans=None) -> "WorldSnapshot":
        return cls(
            layout=layout,
            step=step,
            time=time,
            vehicles=MappingProxyType(dict(vehicles)),
            plans=MappingProxyType(dict(plans or {})),
        )

    def on_segment(self, seg_id: int) -> List[VehicleState]:
        """Vehicles on a segment, leader first"""
        members = [s for s in self.vehicles.values() if s.segment == seg_id]
        return sorted(members, key=lambda s: (-s.x, s.id))

    def in_cz(self, cz: int) -> List[VehicleState]:
        return [s for s in self.vehicles.values() if s.cz == cz]


@dataclass(frozen=True)
class Leader:
    gap: float
    speed: float
    vehicle_id: Optional[int]
    source: str


class VehicleService:
    """Dynamics stepping and human driver decisions"""

    @staticmethod
    def step_dynamics(
        state: VehicleState,
        u: float,
        time_step: float,
        layout: RoundaboutLayout,
        limits: VehicleLimits,
    ) -> VehicleState:
        """Forward-Euler step with zero-order-hold control; overflow carries into the next segment"""
        u = min(max(u, limits.u_min), limits.u_max)
        x = state.x + time_step * state.v
        v = min(max(state.v + time_step * u, limits.v_min), limits.v_max)
        d = state.d + time_step * state.v

        index = state.route_index
        chain = state.route.segment_chain
        finished = False
        while x >= layout.segment_length(chain[index]):
            if state.route.is_last(index):
                finished = True
                break
            x -= layout.segment_length(chain[index])
            index += 1
        return replace(state, route_index=index, x=x, v=v, d=d, finished=finished)

    @staticmethod
    def speed_clamped(state: VehicleState, u: float, time_step: float, limits: VehicleLimits) -> bool:
        u = min(max(u, limits.u_min), limits.u_max)
        raw = state.v + time_step * u
        return raw < limits.v_min - CLAMP_EPS or raw > limits.v_max + CLAMP_EPS

    @staticmethod
    def desired_speed(params: IdmParams, limits: VehicleLimits, aggressiveness: float) -> float:
        base = params.desired_speed if params.desired_speed is not None else limits.v_max
        return min(limits.v_max, base * (1.0 + params.aggressiveness_speed_gain * aggressiveness))

    @staticmethod
    def _idm_raw(v: float, net_gap: Optional[float], leader_speed: Optional[float],
                 params: IdmParams, v0: float) -> float:
        free_term = (v / v0) ** params.exponent if v0 > 0 else 1.0
        interaction = 0.0
        if net_gap is not None:
            closing = v - (leader_speed if leader_speed is not None else v)
            dynamic = v * params.time_headway + v * closing / (2.0 * math.sqrt(params.max_accel * params.comfort_decel))
            s_star = params.min_gap + max(0.0, dynamic)
            interaction = (s_star / net_gap) ** 2
        return params.max_accel * (1.0 - free_term - interaction)

    @staticmethod
    def idm_acceleration(
        state: VehicleState,
        leader_gap: Optional[float],
        leader_speed: Optional[float],
        params: IdmParams,
        limits: VehicleLimits,
    ) -> float:
        """IDM acceleration clamped to the control bounds; no leader means an infinite gap"""
        v0 = VehicleService.desired_speed(params, limits, state.aggressiveness or 0.0)
        net_gap = None
        if leader_gap is not None:
            net_gap = leader_gap - limits.delta
            if net_gap <= 0:
                logger.warning("vehicle %s overlaps its leader (gap %.3f m)", state.id, leader_gap)
                return limits.u_min
        accel = VehicleService._idm_raw(state.v, net_gap, leader_speed, params, v0)
        return min(max(accel, limits.u_min), limits.u_max)

    @staticmethod
    def cah_acceleration(gap: float, speed: float, leader_speed: float,
                         leader_accel: float = 0.0, max_accel: float = math.inf) -> float:
        """Constant-acceleration heuristic: the braking that just avoids a collision if the leader keeps its acceleration"""
        a_l = min(leader_accel, max_accel)
        denominator = leader_speed ** 2 - 2.0 * gap * a_l
        if leader_speed * (speed - leader_speed) <= -2.0 * gap * a_l and denominator > 0:
            return speed ** 2 * a_l / denominator
        closing = max(speed - leader_speed, 0.0)
        return a_l - closing ** 2 / (2.0 * gap)

    @staticmethod
    def hdv_acceleration(
        state: VehicleState,
        leader_gap: Optional[float],
        leader_speed: Optional[float],
        params: IdmParams,
        limits: VehicleLimits,
    ) -> float:
        """IDM blended with the constant-acceleration heuristic, clamped to the control bounds.

        Matches plain IDM whenever IDM is the milder of the two. When a leader cuts in closer than
        the desired gap but is not closing fast, the driver brakes at about the comfortable
        deceleration instead of saturating.
        """
        v0 = VehicleService.desired_speed(params, limits, state.aggressiveness or 0.0)
        if leader_gap is None:
            accel = VehicleService._idm_raw(state.v, None, None, params, v0)
            return min(max(accel, limits.u_min), limits.u_max)
        net_gap = leader_gap - limits.delta
        if net_gap <= 0:
            logger.warning("vehicle %s overlaps its leader (gap %.3f m)", state.id, leader_gap)
            return limits.u_min
        speed = leader_speed if leader_speed is not None else state.v
        a_idm = VehicleService._idm_raw(state.v, net_gap, speed, params, v0)
        a_cah = VehicleService.cah_acceleration(net_gap, state.v, speed, 0.0, params.max_accel)
        if a_idm >= a_cah:
            accel = a_idm
        else:
            b, c = params.comfort_decel, params.coolness
            accel = (1.0 - c) * a_idm + c * (a_cah + b * math.tanh((a_idm - a_cah) / b))
        return min(max(accel, limits.u_min), limits.u_max)

    @staticmethod
    def physical_predecessor(i: VehicleState, world: WorldSnapshot) -> Optional[Tuple[VehicleState, float]]:
        """Nearest vehicle ahead on i's remaining route"""
        best: Optional[Tuple[VehicleState, float]] = None
        for other in world.vehicles.values():
            if other.id == i.id:
                continue
            gap = world.layout.forward_gap(i, other)
            if gap is None:
                continue
            if best is None or gap < best[1] or (gap == best[1] and other.id < best[0].id):
                best = (other, gap)
        return best

    @staticmethod
    def arrival_time(remaining: float, speed: float, accel: Optional[float] = None) -> float:
        """Constant-speed time to cover remaining; from standstill uses accel when given"""
        if speed >= STOPPED_SPEED:
            return remaining / speed
        if accel is not None and accel > 0:
            return math.sqrt(2.0 * max(remaining, 0.0) / accel)
        return math.inf

    @staticmethod
    def accepted_gap(j: VehicleState, params: IdmParams) -> float:
        aggressiveness = j.aggressiveness or 0.0
        return max(0.0, params.accepted_gap * (1.0 - params.aggressiveness_gap_gain * aggressiveness))

    @staticmethod
    def imposed_braking(follower: VehicleState, gap: float, speed: float, params: IdmParams, limits: VehicleLimits) -> float:
        """Acceleration a driver would expect of follower if a vehicle at speed appeared gap metres ahead of it"""
        return VehicleService.hdv_acceleration(follower, gap, speed, params, limits)

    @staticmethod
    def merging_leader(
        j: VehicleState,
        world: WorldSnapshot,
        params: IdmParams,
        limits: Optional[VehicleLimits] = None,
    ) -> Optional[Leader]:
        """Gap-acceptance yielding at j's next merging point.

        An entry driver closer to the MP than a ring vehicle still waits when the ring vehicle is due
        within the accepted time gap, unless pulling out would cost it no more than merge_safe_decel.
        """
        layout = world.layout
        limits = limits or VehicleLimits()
        remaining_j = layout.remaining_to_next_mp(j)
        t_j = VehicleService.arrival_time(remaining_j, j.v, params.max_accel)
        can_stop = remaining_j >= j.v ** 2 / (2.0 * params.comfort_decel)
        tolerance = VehicleService.accepted_gap(j, params)

        projected: Optional[Leader] = None
        must_stop = False
        for other in world.in_cz(j.cz):
            if other.id == j.id or other.c == j.c:
                continue
            t_c = VehicleService.arrival_time(layout.remaining_to_next_mp(other), other.v)
            gap = layout.gap_to_merging_conflict(j, other)
            if t_c < t_j and gap > 0:
                if projected is None or gap < projected.gap:
                    projected = Leader(gap, other.v, other.id, "merging")
            elif j.c == SegmentRole.ENTRY and t_c < t_j + tolerance and gap <= 0:
                if -gap <= limits.delta:
                    must_stop = True
                elif VehicleService.imposed_braking(other, -gap, j.v, params, limits) < -params.merge_safe_decel:
                    must_stop = True

        if must_stop and can_stop:
            stop_line = Leader(max(remaining_j, 0.0), 0.0, None, "stop-line")
            if projected is None or stop_line.gap < projected.gap:
                return stop_line
        return projected

    @staticmethod
    def hdv_effective_leader(
        j: VehicleState,
        world: WorldSnapshot,
        params: IdmParams,
        limits: Optional[VehicleLimits] = None,
    ) -> Optional[Leader]:
        """The more constraining of the physical predecessor and the merging-point leader"""
        if j.kind != VehicleKind.HDV:
            raise ContractViolation(f"vehicle {j.id} is not human-driven")
        candidates: List[Leader] = []
        physical = VehicleService.physical_predecessor(j, world)
        if physical is not None:
            candidates.append(Leader(physical[1], physical[0].v, physical[0].id, "physical"))
        merging = VehicleService.merging_leader(j, world, params, limits)
        if merging is not None:
            candidates.append(merging)
        if not candidates:
            return None
        return min(candidates, key=lambda leader: leader.gap)
