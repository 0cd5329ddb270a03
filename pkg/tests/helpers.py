"""
Builders for hand-placed vehicles and world snapshots
"""
from app.services.geometry_service import RoundaboutLayout
from app.services.vehicle_service import VehicleKind, VehicleState, WorldSnapshot


def place(
    layout: RoundaboutLayout,
    vehicle_id: int,
    origin: int,
    exit_: int,
    route_index: int,
    x: float,
    v: float,
    kind: VehicleKind = VehicleKind.CAV,
    aggressiveness: float = 0.0,
) -> VehicleState:
    """A vehicle at position x on the route_index-th segment of route origin -> exit_"""
    route = layout.route(origin, exit_)
    return VehicleState(
        id=vehicle_id,
        kind=kind,
        route=route,
        route_index=route_index,
        x=x,
        v=v,
        d=route.segment_starts[route_index] + x,
        t0=0.0,
        aggressiveness=aggressiveness if kind == VehicleKind.HDV else None,
    )


def hdv(layout, vehicle_id, origin, exit_, route_index, x, v, aggressiveness=0.0) -> VehicleState:
    return place(layout, vehicle_id, origin, exit_, route_index, x, v, VehicleKind.HDV, aggressiveness)


def world_of(layout: RoundaboutLayout, *vehicles: VehicleState, step: int = 0, plans=None) -> WorldSnapshot:
    return WorldSnapshot.capture(layout, step, step * 0.1, {v.id: v for v in vehicles}, plans)
