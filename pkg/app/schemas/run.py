"""
Pydantic schemas for the run registry API
"""
from datetime import datetime
from typing import Dict, Optional

from pydantic import BaseModel, Field

from app.schemas.policy import SequencingPolicy
from app.schemas.scenario import ScenarioConfig


class RunRequest(BaseModel):
    """A scenario plus the overrides most runs vary"""
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    policy: Optional[SequencingPolicy] = None
    cav_penetration: Optional[float] = Field(None, ge=0, le=1)
    seed: Optional[int] = None
    duration: Optional[float] = Field(None, gt=0)

    def resolved(self) -> ScenarioConfig:
        data = self.scenario.model_dump()
        if self.policy is not None:
            data["policy"]["policy"] = self.policy
        if self.cav_penetration is not None:
            data["cav_penetration"] = self.cav_penetration
        if self.seed is not None:
            data["seed"] = self.seed
        if self.duration is not None:
            data["duration"] = self.duration
        return ScenarioConfig.model_validate(data)


class RunResponse(BaseModel):
    """Schema for run response"""
    id: int
    scenario: str
    policy: str
    penetration: float
    seed: int
    horizon: int
    duration: float
    status: str
    summary: Dict[str, Dict[str, Optional[float]]]
    stats: Dict[str, Optional[float]]
    output_dir: Optional[str] = None
    created_at: Optional[datetime] = None

    class Config:
        from_attributes = True


class VehicleRecordResponse(BaseModel):
    """Schema for one ledger row"""
    vehicle_id: int
    kind: str
    origin: int
    exit: int
    entry_time: float
    exit_time: Optional[float] = None
    travel_time: Optional[float] = None
    mean_speed: Optional[float] = None
    energy: float
    discomfort: float
    avg_objective: Optional[float] = None
    unsafe_count: int
    hard_decel_count: int
    pet_critical_count: int
    infeasible_count: int

    class Config:
        from_attributes = True


class PresetList(BaseModel):
    presets: Dict[str, ScenarioConfig]
