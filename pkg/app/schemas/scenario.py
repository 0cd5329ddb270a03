"""
Pydantic schemas for scenarios and sweeps
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app.schemas.controller import ControllerConfig
from app.schemas.layout import LayoutConfig
from app.schemas.policy import PolicyConfig, SequencingPolicy
from app.schemas.vehicle import IdmParams, VehicleLimits


class TraceMode(str, Enum):
    """How much of a run is written to the JSON-lines trace"""
    OFF = "off"
    SUMMARY = "summary"
    FULL = "full"


DEMAND_PRESETS: Dict[str, List[float]] = {
    "balanced": [396.0, 396.0, 396.0],
    "unbalanced": [108.0, 540.0, 540.0],
    "heavy": [576.0, 576.0, 576.0],
}


class ScenarioConfig(BaseModel):
    """Everything a single seeded run needs"""
    name: str = "balanced"
    arrival_rates: List[float] = Field(default_factory=lambda: list(DEMAND_PRESETS["balanced"]))
    cav_penetration: float = Field(0.5, ge=0, le=1)
    duration: float = Field(1000.0, ge=0)
    seed: int = 0
    resequence_timeout: float = Field(1.0, gt=0)
    spawn_speed: float = Field(10.0, ge=0)
    allow_u_turn: bool = False
    hdv_aggressiveness: float = Field(0.0, ge=-1, le=1)
    aggressiveness_spread: float = Field(0.0, ge=0, le=2)
    pet_threshold: float = Field(1.0, gt=0)
    pet_critical_below: bool = True
    trace: TraceMode = TraceMode.SUMMARY

    layout: LayoutConfig = Field(default_factory=LayoutConfig)
    limits: VehicleLimits = Field(default_factory=VehicleLimits)
    idm: IdmParams = Field(default_factory=IdmParams)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)

    @model_validator(mode="after")
    def check_rates(self) -> "ScenarioConfig":
        if len(self.arrival_rates) == 1:
            self.arrival_rates = self.arrival_rates * self.layout.num_entries
        if len(self.arrival_rates) != self.layout.num_entries:
            raise ValueError(
                f"arrival_rates needs {self.layout.num_entries} values, got {len(self.arrival_rates)}"
            )
        if any(rate < 0 for rate in self.arrival_rates):
            raise ValueError("arrival rates must be non-negative")
        return self

    @property
    def time_step(self) -> float:
        return self.controller.time_step

    @property
    def effective_penetration(self) -> float:
        if self.policy.policy == SequencingPolicy.HDV:
            return 0.0
        return self.cav_penetration

    @classmethod
    def preset(cls, name: str, **overrides) -> "ScenarioConfig":
        if name not in DEMAND_PRESETS:
            raise ValueError(f"unknown demand preset '{name}'")
        return cls(name=name, arrival_rates=list(DEMAND_PRESETS[name]), **overrides)


class SweepSpec(BaseModel):
    """Grid of runs: policies x demands x penetrations x horizons x aggressiveness x seeds"""
    base: ScenarioConfig = Field(default_factory=ScenarioConfig)
    policies: List[SequencingPolicy] = Field(default_factory=lambda: [SequencingPolicy.SS])
    demands: List[str] = Field(default_factory=list)
    penetrations: List[float] = Field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    horizons: List[int] = Field(default_factory=list)
    aggressiveness: List[float] = Field(default_factory=list)
    seeds: List[int] = Field(default_factory=lambda: [0])
    replications: int = Field(1, ge=1)
    controlled_comparison: bool = True
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def check_axes(self) -> "SweepSpec":
        if any(not 0.0 <= p <= 1.0 for p in self.penetrations):
            raise ValueError("penetrations must lie in [0, 1]")
        if any(h < 1 for h in self.horizons):
            raise ValueError("horizons must be >= 1")
        if any(not -1.0 <= a <= 1.0 for a in self.aggressiveness):
            raise ValueError("aggressiveness values must lie in [-1, 1]")
        unknown = [d for d in self.demands if d not in DEMAND_PRESETS]
        if unknown:
            raise ValueError(f"unknown demand presets: {unknown}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        return self

    @property
    def expanded_seeds(self) -> List[int]:
        """Each listed seed followed by replications - 1 derived seeds"""
        seeds: List[int] = []
        for seed in self.seeds:
            seeds.extend(seed + 1000 * r for r in range(self.replications))
        return seeds
