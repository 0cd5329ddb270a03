"""
Roundabout geometry: segments, routes, curvature and inter-vehicle distances

Segment ids encode their control zone and role: id = 2 * cz + role, where role 0 is the
ring arc ending at merging point M_cz and role 1 the straight entry road feeding M_cz.
Ring arc k runs from M_{k-1} to M_k (counterclockwise), so M_k sits at the cumulative arc
length of curves 0..k. A route leaves the roundabout at the merging point of its final
control zone.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Protocol, Tuple

from app.core.exceptions import ContractViolation, GeometryDomainError, TopologyError
from app.schemas.layout import CIRCUMFERENCE_TOLERANCE, LayoutConfig

ROUTE_EPS = 1e-9


class SegmentRole(IntEnum):
    """c value of a road segment"""
    CURVE = 0
    ENTRY = 1


def segment_id(cz: int, role: SegmentRole) -> int:
    return 2 * cz + int(role)


@dataclass(frozen=True)
class Segment:
    id: int
    cz: int
    role: SegmentRole
    length: float


@dataclass(frozen=True)
class RouteSpec:
    """Ordered segments from an origin entry road to the exit merging point"""
    origin: int
    exit: int
    segment_chain: Tuple[int, ...]
    mp_chain: Tuple[int, ...]
    segment_starts: Tuple[float, ...]
    total_length: float

    def index_at(self, d: float) -> int:
        """Chain index of the segment containing route distance d (half-open intervals)"""
        if d < -ROUTE_EPS or d > self.total_length + ROUTE_EPS:
            raise GeometryDomainError(
                f"d={d} outside route {self.origin}->{self.exit} of length {self.total_length}"
            )
        index = bisect.bisect_right(self.segment_starts, d) - 1
        return min(max(index, 0), len(self.segment_chain) - 1)

    def is_last(self, index: int) -> bool:
        return index == len(self.segment_chain) - 1


class Positioned(Protocol):
    segment: int
    x: float


class Routed(Protocol):
    segment: int
    x: float
    route: RouteSpec
    route_index: int


@dataclass(frozen=True, eq=False)
class RoundaboutLayout:
    """Static roundabout topology; immutable after construction"""
    num_entries: int
    entry_length: Tuple[float, ...]
    curve_length: Tuple[float, ...]
    ring_radius: float
    mp_arc_position: Tuple[float, ...]
    segments: Tuple[Segment, ...]
    routes: Dict[Tuple[int, int], RouteSpec] = field(repr=False)

    @classmethod
    def from_config(cls, config: LayoutConfig) -> "RoundaboutLayout":
        n = config.num_entries
        entry = tuple(float(v) for v in config.entry_lengths)
        curve = tuple(float(v) for v in config.curve_lengths)
        radius = config.resolved_radius

        positions: List[float] = []
        total = 0.0
        for length in curve:
            total += length
            positions.append(total)

        segments: List[Segment] = []
        for cz in range(n):
            segments.append(Segment(segment_id(cz, SegmentRole.CURVE), cz, SegmentRole.CURVE, curve[cz]))
            segments.append(Segment(segment_id(cz, SegmentRole.ENTRY), cz, SegmentRole.ENTRY, entry[cz]))

        layout = cls(
            num_entries=n,
            entry_length=entry,
            curve_length=curve,
            ring_radius=radius,
            mp_arc_position=tuple(positions),
            segments=tuple(segments),
            routes={},
        )
        layout._validate()
        for origin in range(n):
            for exit_ in range(n):
                layout.routes[(origin, exit_)] = layout._build_route(origin, exit_)
        return layout

    def _validate(self) -> None:
        if any(s.length <= 0 for s in self.segments):
            raise ValueError("segment lengths must be strictly positive")
        if abs(self.circumference - 2.0 * math.pi * self.ring_radius) > CIRCUMFERENCE_TOLERANCE:
            raise ValueError("curve segments do not tile the ring circumference")

    def _build_route(self, origin: int, exit_: int) -> RouteSpec:
        n = self.num_entries
        arcs = (exit_ - origin) % n or n
        chain = [segment_id(origin, SegmentRole.ENTRY)]
        chain.extend(segment_id((origin + j) % n, SegmentRole.CURVE) for j in range(1, arcs + 1))

        starts: List[float] = []
        total = 0.0
        for seg in chain:
            starts.append(total)
            total += self.segments[seg].length
        return RouteSpec(
            origin=origin,
            exit=exit_,
            segment_chain=tuple(chain),
            mp_chain=tuple(self.segments[seg].cz for seg in chain),
            segment_starts=tuple(starts),
            total_length=total,
        )

    @property
    def circumference(self) -> float:
        return math.fsum(self.curve_length)

    @property
    def kappa_max(self) -> float:
        return 1.0 / self.ring_radius

    def segment(self, seg_id: int) -> Segment:
        return self.segments[seg_id]

    def segment_length(self, seg_id: int) -> float:
        return self.segments[seg_id].length

    def cz_membership(self, seg_id: int) -> int:
        return self.segments[seg_id].cz

    def route(self, origin: int, exit_: int) -> RouteSpec:
        return self.routes[(origin, exit_)]

    def valid_exits(self, origin: int, allow_u_turn: bool = False) -> List[int]:
        return [e for e in range(self.num_entries) if allow_u_turn or e != origin]

    def segment_curvature(self, seg_id: int) -> float:
        if self.segments[seg_id].role == SegmentRole.ENTRY:
            return 0.0
        return 1.0 / self.ring_radius

    def curvature_at(self, route: RouteSpec, d: float) -> float:
        """Piecewise-constant curvature; a boundary belongs to the segment being entered"""
        return self.segment_curvature(route.segment_chain[route.index_at(d)])

    def _ring_start(self, cz: int) -> float:
        return self.mp_arc_position[cz - 1] if cz > 0 else 0.0

    def _ring_distance(self, start: float, end: float) -> float:
        return (end - start) % self.circumference

    def offset_between(self, from_seg: int, to_seg: int) -> float:
        """Along-road distance between the origins of two segments (the ΔL term)"""
        if from_seg == to_seg:
            return 0.0
        src, dst = self.segments[from_seg], self.segments[to_seg]
        if dst.role == SegmentRole.ENTRY:
            raise TopologyError(f"segment {to_seg} is an entry road and cannot be reached from {from_seg}")
        if src.role == SegmentRole.ENTRY:
            ring_from = self.mp_arc_position[src.cz]
            return src.length + self._ring_distance(ring_from, self._ring_start(dst.cz))
        return self._ring_distance(self._ring_start(src.cz), self._ring_start(dst.cz))

    def gap_to_predecessor(self, i: Positioned, ip: Positioned) -> float:
        """z_{i,i_p}: center-to-center distance from i forward to i_p"""
        return ip.x + self.offset_between(i.segment, ip.segment) - i.x

    def gap_to_merging_conflict(self, i: Positioned, im: Positioned) -> float:
        """z_{i,i_m} = (L_i - x_i) - (L_im - x_im); positive when i_m is closer to the MP"""
        if i.segment == im.segment:
            raise ContractViolation("merging conflict pair must be on different segments")
        if self.cz_membership(i.segment) != self.cz_membership(im.segment):
            raise ContractViolation("merging conflict pair must share a control zone")
        return (self.segment_length(i.segment) - i.x) - (self.segment_length(im.segment) - im.x)

    def remaining_to_next_mp(self, i: Positioned) -> float:
        """Distance to the end of the current segment; on the last segment this is the exit"""
        return self.segment_length(i.segment) - i.x

    def forward_gap(self, i: Routed, j: Positioned) -> Optional[float]:
        """z_{i,j} when j is ahead on i's remaining route, else None"""
        if j.segment not in i.route.segment_chain[i.route_index:]:
            return None
        gap = self.gap_to_predecessor(i, j)
        if j.segment == i.segment and gap < 0:
            return None
        return gap
