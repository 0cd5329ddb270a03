"""
Run registry models: one row per simulation run and one per completed vehicle
"""
from sqlalchemy import JSON, Column, DateTime, Float, ForeignKey, Integer, String
from sqlalchemy.orm import relationship
from sqlalchemy.sql import func

from app.core.database import Base


class SimulationRun(Base):
    """A finished seeded run and its metric summary"""

    __tablename__ = "simulation_runs"

    id = Column(Integer, primary_key=True, index=True)
    scenario = Column(String(100), nullable=False, index=True)
    policy = Column(String(10), nullable=False)
    penetration = Column(Float, nullable=False)
    seed = Column(Integer, nullable=False)
    horizon = Column(Integer, nullable=False)
    duration = Column(Float, nullable=False)
    status = Column(String(20), nullable=False, default="completed")
    summary = Column(JSON, nullable=False, default=dict)
    stats = Column(JSON, nullable=False, default=dict)
    config = Column(JSON, nullable=False, default=dict)
    output_dir = Column(String(500), nullable=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    vehicles = relationship(
        "VehicleRecord", back_populates="run", cascade="all, delete-orphan", order_by="VehicleRecord.vehicle_id"
    )

    def __repr__(self):
        return f"<SimulationRun(id={self.id}, scenario='{self.scenario}', policy='{self.policy}', seed={self.seed})>"


class VehicleRecord(Base):
    """Ledger row of one vehicle"""

    __tablename__ = "vehicle_records"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("simulation_runs.id"), nullable=False, index=True)
    vehicle_id = Column(Integer, nullable=False)
    kind = Column(String(3), nullable=False)
    origin = Column(Integer, nullable=False)
    exit = Column(Integer, nullable=False)
    entry_time = Column(Float, nullable=False)
    exit_time = Column(Float, nullable=True)
    travel_time = Column(Float, nullable=True)
    mean_speed = Column(Float, nullable=True)
    energy = Column(Float, nullable=False, default=0.0)
    discomfort = Column(Float, nullable=False, default=0.0)
    avg_objective = Column(Float, nullable=True)
    unsafe_count = Column(Integer, nullable=False, default=0)
    hard_decel_count = Column(Integer, nullable=False, default=0)
    pet_critical_count = Column(Integer, nullable=False, default=0)
    infeasible_count = Column(Integer, nullable=False, default=0)

    run = relationship("SimulationRun", back_populates="vehicles")

    def __repr__(self):
        return f"<VehicleRecord(run_id={self.run_id}, vehicle_id={self.vehicle_id}, kind='{self.kind}')>"
