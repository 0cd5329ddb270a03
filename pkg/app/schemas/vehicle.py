"""
Pydantic schemas for vehicle limits and the human driver model
"""
from typing import Optional

from pydantic import BaseModel, Field, model_validator


class VehicleLimits(BaseModel):
    """Speed/control bounds and the safety constants shared by all vehicles"""
    v_min: float = Field(0.0, ge=0)
    v_max: float = 20.0
    u_min: float = Field(-4.0, lt=0)
    u_max: float = Field(4.0, gt=0)
    phi: float = Field(1.8, gt=0, description="reaction time (s)")
    delta: float = Field(0.0, ge=0, description="center-to-center length allowance (m)")
    height: float = Field(1.5, gt=0)
    half_width: float = Field(0.9, gt=0)
    gravity: float = Field(9.81, gt=0)

    @model_validator(mode="after")
    def check_speed_band(self) -> "VehicleLimits":
        if self.v_max <= self.v_min:
            raise ValueError("v_max must exceed v_min")
        return self

    @property
    def u_scale(self) -> float:
        return max(self.u_max ** 2, self.u_min ** 2)


class IdmParams(BaseModel):
    """Intelligent Driver Model parameters plus the gap-acceptance rule used at merging points"""
    desired_speed: Optional[float] = Field(
        None, gt=0, description="v0; derived from v_max and aggressiveness when omitted"
    )
    time_headway: float = Field(1.5, gt=0)
    min_gap: float = Field(2.0, ge=0)
    max_accel: float = Field(2.0, gt=0)
    comfort_decel: float = Field(3.0, gt=0)
    exponent: float = Field(4.0, gt=0)
    accepted_gap: float = Field(2.0, ge=0, description="base accepted time gap at a merging point (s)")
    aggressiveness_speed_gain: float = 0.1
    aggressiveness_gap_gain: float = 0.3
    coolness: float = Field(0.99, ge=0, le=1, description="weight of the constant-acceleration heuristic in the HDV response")
    merge_safe_decel: float = Field(
        3.0, gt=0, description="hardest braking an entry driver will impose on a ring vehicle by pulling out (m/s^2)"
    )
