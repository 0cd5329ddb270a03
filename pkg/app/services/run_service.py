"""
Run registry service
"""
import json
import math
from typing import List, Optional

from sqlalchemy.orm import Session

from app.models.run import SimulationRun, VehicleRecord
from app.services.simulation_service import RunResult, Simulator
from app.schemas.scenario import ScenarioConfig


def _finite(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RunService:
    """Persist and query simulation runs"""

    @staticmethod
    def record_run(db: Session, result: RunResult, output_dir: Optional[str] = None) -> SimulationRun:
        """Store a finished run with one row per completed vehicle"""
        config = result.config
        db_run = SimulationRun(
            scenario=config.name,
            policy=config.policy.policy.value,
            penetration=config.effective_penetration,
            seed=config.seed,
            horizon=config.controller.horizon,
            duration=config.duration,
            status="completed",
            summary=result.summary,
            stats={k: _finite(float(v)) for k, v in result.run_stats().items()},
            config=json.loads(config.model_dump_json()),
            output_dir=output_dir,
        )
        for record in result.ledger.records.values():
            if not record.completed:
                continue
            db_run.vehicles.append(VehicleRecord(
                vehicle_id=record.vehicle_id,
                kind=record.kind,
                origin=record.origin,
                exit=record.exit,
                entry_time=record.entry_time,
                exit_time=record.exit_time,
                travel_time=record.travel_time,
                mean_speed=record.mean_speed,
                energy=record.energy,
                discomfort=record.discomfort,
                avg_objective=record.avg_objective,
                unsafe_count=record.unsafe_count,
                hard_decel_count=record.hard_decel_count,
                pet_critical_count=record.pet_critical_count,
                infeasible_count=record.infeasible_count,
            ))
        db.add(db_run)
        db.commit()
        db.refresh(db_run)
        return db_run

    @staticmethod
    def execute(db: Session, config: ScenarioConfig) -> SimulationRun:
        """Run a scenario synchronously and persist it"""
        result = Simulator(config).run()
        return RunService.record_run(db, result)

    @staticmethod
    def get_run(db: Session, run_id: int) -> Optional[SimulationRun]:
        return db.query(SimulationRun).filter(SimulationRun.id == run_id).first()

    @staticmethod
    def list_runs(
        db: Session,
        scenario: Optional[str] = None,
        policy: Optional[str] = None,
        skip: int = 0,
        limit: int = 100,
    ) -> List[SimulationRun]:
        query = db.query(SimulationRun)
        if scenario is not None:
            query = query.filter(SimulationRun.scenario == scenario)
        if policy is not None:
            query = query.filter(SimulationRun.policy == policy)
        return query.order_by(SimulationRun.id).offset(skip).limit(limit).all()

    @staticmethod
    def get_vehicles(db: Session, run_id: int) -> Optional[List[VehicleRecord]]:
        run = RunService.get_run(db, run_id)
        if run is None:
            return None
        return list(run.vehicles)
