"""
Tests for vehicle dynamics and the human driver model
"""
import numpy as np
import pytest

from app.core.exceptions import ContractViolation
from app.schemas.policy import SafePolicyParams
from app.schemas.vehicle import IdmParams
from app.services.vehicle_service import VehicleKind, VehicleService, VehicleState
from tests.helpers import hdv, place, world_of


# ============================================================================
# STATE
# ============================================================================

def test_aggressiveness_only_for_hdvs(layout):
    route = layout.route(0, 1)
    with pytest.raises(ContractViolation):
        VehicleState(1, VehicleKind.CAV, route, 0, 0.0, 10.0, 0.0, 0.0, aggressiveness=0.5)
    with pytest.raises(ContractViolation):
        VehicleState(2, VehicleKind.HDV, route, 0, 0.0, 10.0, 0.0, 0.0)


def test_spawned_vehicle_starts_at_entry_origin(layout):
    state = VehicleState.spawn(7, VehicleKind.HDV, layout.route(1, 0), 3.0, 10.0, aggressiveness=-0.2)
    assert state.segment == 3
    assert state.cz == 1
    assert state.x == 0.0 and state.d == 0.0
    assert not state.is_cav
    assert not state.in_final_cz


# ============================================================================
# DYNAMICS
# ============================================================================

def test_step_dynamics_euler(layout, limits):
    state = place(layout, 1, 0, 1, 0, 10.0, 10.0)
    new = VehicleService.step_dynamics(state, 2.0, 0.1, layout, limits)
    assert new.x == pytest.approx(11.0)
    assert new.v == pytest.approx(10.2)
    assert new.d == pytest.approx(11.0)


def test_step_dynamics_carries_overflow_into_next_segment(layout, limits):
    state = place(layout, 1, 0, 1, 0, 59.95, 10.0)
    new = VehicleService.step_dynamics(state, 0.0, 0.1, layout, limits)
    assert new.route_index == 1
    assert new.segment == 2
    assert new.x == pytest.approx(0.95)
    assert new.d == pytest.approx(60.95)
    assert not new.finished


def test_step_dynamics_finishes_at_exit(layout, limits):
    state = place(layout, 1, 0, 1, 1, 59.5, 10.0)
    new = VehicleService.step_dynamics(state, 0.0, 0.1, layout, limits)
    assert new.finished


def test_speed_and_control_are_clamped(layout, limits):
    fast = place(layout, 1, 0, 1, 0, 0.0, 19.9)
    assert VehicleService.step_dynamics(fast, 4.0, 0.1, layout, limits).v == pytest.approx(20.0)
    assert VehicleService.speed_clamped(fast, 4.0, 0.1, limits)

    slow = place(layout, 2, 0, 1, 0, 0.0, 0.1)
    assert VehicleService.step_dynamics(slow, -9.0, 0.1, layout, limits).v == 0.0
    assert VehicleService.speed_clamped(slow, -4.0, 0.1, limits)
    assert not VehicleService.speed_clamped(slow, 1.0, 0.1, limits)


def test_distance_is_monotone(layout, limits):
    state = place(layout, 1, 0, 2, 0, 0.0, 10.0)
    for step in range(150):
        new = VehicleService.step_dynamics(state, -4.0 if step % 20 < 10 else 4.0, 0.1, layout, limits)
        assert new.d >= state.d
        assert new.d - state.d == pytest.approx(0.1 * state.v)
        state = new


# ============================================================================
# IDM
# ============================================================================

def test_idm_example(layout, limits):
    """v = 10, v0 = 15, gap 30 m behind an equal-speed leader"""
    params = IdmParams(desired_speed=15.0)
    state = hdv(layout, 1, 0, 1, 0, 0.0, 10.0)
    assert VehicleService.idm_acceleration(state, 30.0, 10.0, params, limits) == pytest.approx(0.963, abs=1e-3)


def test_idm_free_road_at_desired_speed(layout, limits):
    params = IdmParams(desired_speed=15.0)
    state = hdv(layout, 1, 0, 1, 0, 0.0, 15.0)
    assert VehicleService.idm_acceleration(state, None, None, params, limits) == pytest.approx(0.0)


def test_idm_standstill_equilibrium(layout, limits, idm):
    state = hdv(layout, 1, 0, 1, 0, 0.0, 0.0)
    assert VehicleService.idm_acceleration(state, idm.min_gap, 0.0, idm, limits) == pytest.approx(0.0)


def test_idm_brakes_hard_when_closing(layout, limits, idm):
    state = hdv(layout, 1, 0, 1, 0, 0.0, 10.0)
    assert VehicleService.idm_acceleration(state, 3.0, 0.0, idm, limits) == limits.u_min
    assert VehicleService.idm_acceleration(state, 0.0, 10.0, idm, limits) == limits.u_min


def test_idm_is_monotone_in_gap_and_closing_speed(layout, limits, idm):
    """Randomized: a larger gap never lowers the response, a faster leader never lowers it either"""
    rng = np.random.default_rng(11)
    for _ in range(500):
        v = float(rng.uniform(0.0, limits.v_max))
        gap = float(rng.uniform(0.5, 120.0))
        leader_speed = float(rng.uniform(0.0, limits.v_max))
        state = hdv(layout, 1, 0, 1, 0, 0.0, v, aggressiveness=float(rng.uniform(-1.0, 1.0)))
        wider = gap + float(rng.uniform(0.0, 20.0))
        faster = leader_speed + float(rng.uniform(0.0, 5.0))
        for response in (VehicleService.idm_acceleration, VehicleService.hdv_acceleration):
            base = response(state, gap, leader_speed, idm, limits)
            assert limits.u_min <= base <= limits.u_max
            assert response(state, wider, leader_speed, idm, limits) >= base - 1e-12
            assert response(state, gap, faster, idm, limits) >= base - 1e-12


# ============================================================================
# HUMAN RESPONSE TO CUT-INS
# ============================================================================

def test_cah_examples():
    assert VehicleService.cah_acceleration(20.0, 15.0, 12.0) == pytest.approx(-0.225)
    assert VehicleService.cah_acceleration(20.0, 10.0, 14.0) == pytest.approx(0.0)
    assert VehicleService.cah_acceleration(20.0, 10.0, 0.0) == pytest.approx(-2.5)


def test_hdv_response_matches_idm_on_free_road(layout, limits, idm):
    state = hdv(layout, 1, 0, 1, 0, 0.0, 9.0, aggressiveness=0.4)
    assert VehicleService.hdv_acceleration(state, None, None, idm, limits) == pytest.approx(
        VehicleService.idm_acceleration(state, None, None, idm, limits)
    )
    assert VehicleService.hdv_acceleration(state, 80.0, 12.0, idm, limits) == pytest.approx(
        VehicleService.idm_acceleration(state, 80.0, 12.0, idm, limits)
    )


def test_hdv_response_to_a_cut_in(layout, limits, idm):
    """A 15 m/s driver with a 12 m/s vehicle cutting in 20 m ahead brakes at about b, not u_min"""
    state = hdv(layout, 1, 0, 1, 0, 0.0, 15.0)
    assert VehicleService.idm_acceleration(state, 20.0, 12.0, idm, limits) == limits.u_min
    assert VehicleService.hdv_acceleration(state, 20.0, 12.0, idm, limits) == pytest.approx(-2.87, abs=0.01)


@pytest.mark.parametrize("leader_speed", [10.0, 12.0, 14.0])
def test_cut_in_at_the_admitted_margin_is_not_a_hard_brake(layout, limits, idm, leader_speed):
    """A CAV admitted ahead of a 12 m/s HDV at the base margin delta_j costs it less than u_min"""
    margin = SafePolicyParams().delta_j
    state = hdv(layout, 1, 2, 1, 1, 10.0, 12.0)
    response = VehicleService.hdv_acceleration(state, margin, leader_speed, idm, limits)
    assert response > limits.u_min + 0.4
    assert response >= -3.5


def test_aggressiveness_raises_desired_speed(limits):
    params = IdmParams(desired_speed=15.0)
    assert VehicleService.desired_speed(params, limits, 0.0) == pytest.approx(15.0)
    assert VehicleService.desired_speed(params, limits, 1.0) == pytest.approx(16.5)
    assert VehicleService.desired_speed(IdmParams(), limits, 1.0) == pytest.approx(limits.v_max)


# ============================================================================
# LEADERS
# ============================================================================

def test_physical_predecessor(layout):
    follower = hdv(layout, 1, 0, 2, 0, 10.0, 10.0)
    ahead = place(layout, 2, 0, 1, 1, 5.0, 10.0)
    elsewhere = place(layout, 3, 1, 0, 0, 50.0, 10.0)
    found = VehicleService.physical_predecessor(follower, world_of(layout, follower, ahead, elsewhere))
    assert found[0].id == 2
    assert found[1] == pytest.approx(55.0)


def test_merging_leader_projection(layout, idm):
    """A ring vehicle reaching the MP first becomes a projected leader"""
    j = hdv(layout, 1, 0, 1, 0, 10.0, 10.0)
    ring = place(layout, 2, 2, 0, 1, 40.0, 10.0)
    leader = VehicleService.hdv_effective_leader(j, world_of(layout, j, ring), idm)
    assert leader.source == "merging"
    assert leader.vehicle_id == 2
    assert leader.gap == pytest.approx(30.0)
    assert leader.speed == pytest.approx(10.0)


def test_entry_hdv_yields_at_stop_line(layout, idm):
    """A ring vehicle level with the entry HDV and arriving sooner forces a stop at the MP"""
    j = hdv(layout, 1, 0, 1, 0, 40.0, 5.0)
    ring = place(layout, 2, 2, 0, 1, 30.0, 10.0)
    leader = VehicleService.hdv_effective_leader(j, world_of(layout, j, ring), idm)
    assert leader.source == "stop-line"
    assert leader.gap == pytest.approx(20.0)
    assert leader.speed == 0.0


def test_entry_hdv_pulls_out_when_the_ring_vehicle_can_absorb_it(layout, idm, limits):
    """Stopped at the line with a slowed ring CAV 10 m from the MP, the driver goes"""
    j = hdv(layout, 1, 0, 1, 0, 59.5, 0.0)
    ring = place(layout, 2, 2, 1, 1, 50.0, 5.0)
    world = world_of(layout, j, ring)
    t_j = VehicleService.arrival_time(0.5, 0.0, idm.max_accel)
    assert VehicleService.arrival_time(10.0, 5.0) < t_j + VehicleService.accepted_gap(j, idm)
    assert VehicleService.imposed_braking(ring, 9.5, 0.0, idm, limits) > -idm.merge_safe_decel
    assert VehicleService.hdv_effective_leader(j, world, idm, limits) is None


def test_entry_hdv_waits_when_pulling_out_forces_hard_braking(layout, idm, limits):
    j = hdv(layout, 1, 0, 1, 0, 59.5, 0.0)
    ring = place(layout, 2, 2, 1, 1, 50.0, 10.0)
    world = world_of(layout, j, ring)
    assert VehicleService.imposed_braking(ring, 9.5, 0.0, idm, limits) < -idm.merge_safe_decel
    leader = VehicleService.hdv_effective_leader(j, world, idm, limits)
    assert leader.source == "stop-line"
    assert leader.gap == pytest.approx(0.5)


def test_merge_safe_decel_is_configurable(layout, limits):
    j = hdv(layout, 1, 0, 1, 0, 59.5, 0.0)
    ring = place(layout, 2, 2, 1, 1, 50.0, 5.0)
    timid = IdmParams(merge_safe_decel=1.0)
    leader = VehicleService.hdv_effective_leader(j, world_of(layout, j, ring), timid, limits)
    assert leader.source == "stop-line"


def test_physical_leader_wins_when_closer(layout, idm):
    j = hdv(layout, 1, 0, 1, 0, 10.0, 10.0)
    ahead = hdv(layout, 2, 0, 1, 0, 20.0, 10.0)
    ring = place(layout, 3, 2, 0, 1, 40.0, 10.0)
    leader = VehicleService.hdv_effective_leader(j, world_of(layout, j, ahead, ring), idm)
    assert leader.source == "physical"
    assert leader.vehicle_id == 2
    assert leader.gap == pytest.approx(10.0)


def test_no_leader_on_empty_road(layout, idm):
    j = hdv(layout, 1, 0, 1, 0, 10.0, 10.0)
    assert VehicleService.hdv_effective_leader(j, world_of(layout, j), idm) is None


def test_effective_leader_rejects_cavs(layout, idm):
    cav = place(layout, 1, 0, 1, 0, 10.0, 10.0)
    with pytest.raises(ContractViolation):
        VehicleService.hdv_effective_leader(cav, world_of(layout, cav), idm)
