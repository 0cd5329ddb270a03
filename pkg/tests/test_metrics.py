"""
Tests for the metrics ledger
"""
import pytest

from app.schemas.vehicle import VehicleLimits
from app.services.geometry_service import SegmentRole
from app.services.metrics_service import SUMMARY_LABELS, MetricsLedger, MpCrossing, VehicleRecord


def ledger_with(*ids, kind="cav", **kwargs) -> MetricsLedger:
    ledger = MetricsLedger(VehicleLimits(), **kwargs)
    for vid in ids:
        ledger.register(VehicleRecord(vehicle_id=vid, kind=kind, origin=0, exit=1, arrival_time=0.0, entry_time=0.0))
    return ledger


# ============================================================================
# SAFETY COUNTERS
# ============================================================================

def test_unsafe_threshold():
    ledger = ledger_with(1)
    assert ledger.record_unsafe(1, 17.0, 10.0)
    assert not ledger.record_unsafe(1, 18.0, 10.0)
    assert not ledger.record_unsafe(1, None, 10.0)


def test_unsafe_counts_rising_edges():
    ledger = ledger_with(1)
    for gap in [30, 17, 16, 15, 17, 17.5, 30, 30, 10, 30]:
        ledger.record_unsafe(1, float(gap), 10.0)
    record = ledger.records[1]
    assert record.unsafe_count == 2
    assert record.unsafe_steps == 6


def test_hard_deceleration_episodes():
    ledger = ledger_with(1)
    for u in [-4.0, -4.0, -4.0, 0.0, -3.99, -4.0]:
        ledger.record_hard_decel(1, u)
    record = ledger.records[1]
    assert record.hard_decel_count == 2
    assert record.hard_decel_steps == 4


def test_near_limit_braking_is_not_hard():
    ledger = ledger_with(1)
    for _ in range(10):
        ledger.record_hard_decel(1, -3.99)
    assert ledger.records[1].hard_decel_count == 0


# ============================================================================
# PET
# ============================================================================

def test_pet_between_segments():
    ledger = ledger_with(1, 2, 3)
    assert ledger.record_pet(0, MpCrossing(1, SegmentRole.CURVE, 4.8, 5.0)) is None
    assert ledger.record_pet(0, MpCrossing(2, SegmentRole.ENTRY, 5.8, 6.0)) == pytest.approx(0.8)
    assert ledger.records[2].pet_critical_count == 1
    assert ledger.record_pet(0, MpCrossing(3, SegmentRole.CURVE, 7.5, 7.7)) == pytest.approx(1.5)
    assert ledger.records[3].pet_critical_count == 0
    assert ledger.counters.pet_pairs == 2
    assert ledger.counters.pet_critical == 1


def test_same_segment_crossings_do_not_pair():
    ledger = ledger_with(1, 2)
    ledger.record_pet(1, MpCrossing(1, SegmentRole.CURVE, 1.0, 1.0))
    assert ledger.record_pet(1, MpCrossing(2, SegmentRole.CURVE, 1.2, 1.2)) is None
    assert ledger.counters.pet_pairs == 0


def test_critical_direction_switch():
    ledger = ledger_with(1, 2, pet_threshold=1.0, pet_critical_below=False)
    ledger.record_pet(2, MpCrossing(1, SegmentRole.ENTRY, 0.0, 0.0))
    ledger.record_pet(2, MpCrossing(2, SegmentRole.CURVE, 3.0, 3.0))
    assert ledger.records[2].pet_critical_count == 1
    assert ledger.is_critical(1.5) and not ledger.is_critical(0.5)


# ============================================================================
# EFFICIENCY
# ============================================================================

def test_energy_integral():
    ledger = ledger_with(1)
    for _ in range(30):
        ledger.accumulate_efficiency(1, 2.0, 10.0, 0.0, 0.1)
    assert ledger.records[1].energy == pytest.approx(6.0)
    assert ledger.records[1].discomfort == 0.0


def test_discomfort_integral():
    ledger = ledger_with(1)
    for _ in range(10):
        ledger.accumulate_efficiency(1, 0.0, 10.0, 0.0349066, 0.1)
    assert ledger.records[1].discomfort == pytest.approx(3.49066, abs=1e-5)
    assert ledger.records[1].energy == 0.0


def test_travel_time_and_mean_speed():
    ledger = ledger_with(1)
    ledger.records[1].entry_time = 2.0
    for _ in range(4):
        ledger.accumulate_efficiency(1, 0.0, 10.0, 0.0, 0.1, objective=0.5)
    ledger.finalize(1, 14.0, 120.0)
    record = ledger.records[1]
    assert record.completed
    assert record.travel_time == pytest.approx(12.0)
    assert record.mean_speed == pytest.approx(10.0)
    assert record.avg_objective == pytest.approx(0.5)
    assert ledger.counters.exited == 1


# ============================================================================
# AGGREGATES
# ============================================================================

def test_summary_covers_completed_vehicles_by_kind():
    ledger = MetricsLedger(VehicleLimits())
    for vid, kind, energy in [(1, "cav", 2.0), (2, "cav", 4.0), (3, "hdv", 10.0), (4, "hdv", 99.0)]:
        ledger.register(VehicleRecord(vehicle_id=vid, kind=kind, origin=0, exit=1, arrival_time=0.0, entry_time=0.0))
        ledger.records[vid].energy = energy
    for vid in (1, 2, 3):
        ledger.finalize(vid, 10.0, 120.0)
    ledger.record_infeasible(2)

    summary = ledger.summary()
    energy = SUMMARY_LABELS["energy"]
    assert summary["cav"]["count"] == 2
    assert summary["cav"][energy] == pytest.approx(3.0)
    assert summary["hdv"][energy] == pytest.approx(10.0)
    assert summary["all"][energy] == pytest.approx(16.0 / 3)
    assert summary["cav"][SUMMARY_LABELS["infeasible_count"]] == pytest.approx(0.5)
    assert summary["all"][SUMMARY_LABELS["mean_speed"]] == pytest.approx(12.0)


def test_summary_of_empty_group_is_blank():
    summary = ledger_with(1, kind="hdv").summary()
    assert summary["cav"]["count"] == 0
    assert all(summary["cav"][label] is None for label in SUMMARY_LABELS.values())


def test_ledger_frame_and_csv(tmp_path):
    ledger = ledger_with(1, 2)
    ledger.finalize(1, 8.0, 120.0)
    frame = ledger.to_frame()
    assert list(frame["vehicle_id"]) == [1, 2]
    assert "in_unsafe" not in frame.columns
    assert {"travel_time", "mean_speed", "avg_objective"} <= set(frame.columns)
    ledger.write_csv(tmp_path / "ledger.csv")
    assert (tmp_path / "ledger.csv").read_text().startswith("vehicle_id,")


def test_run_stats_averages():
    ledger = ledger_with(1)
    ledger.record_sequencing(feasible=6, safe=4, solves=8)
    ledger.record_sequencing(feasible=2, safe=2, solves=2)
    stats = ledger.run_stats()
    assert stats["resequencings"] == 2
    assert stats["avg_feasible_sequences"] == pytest.approx(4.0)
    assert stats["avg_safe_sequences"] == pytest.approx(3.0)
    assert stats["avg_solves_per_resequencing"] == pytest.approx(5.0)
