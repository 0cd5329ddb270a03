"""
Pydantic schemas for the horizon controller
"""
from pydantic import BaseModel, Field


class CbfParams(BaseModel):
    """Linear class-K gains k1..k5 and the CLBF gain/exponent; b4 is enforced through p and q, so k4 is unused"""
    k1: float = Field(1.0, gt=0)
    k2: float = Field(1.0, gt=0)
    k3: float = Field(1.0, gt=0)
    k4: float = Field(1.0, gt=0, description="not read: the merging barrier is a CLBF driven by p and q")
    k5: float = Field(1.0, gt=0)
    p: float = Field(1.0, gt=0)
    q: float = Field(0.5, gt=0, lt=1)


class ControllerConfig(BaseModel):
    """Receding-horizon QP settings"""
    horizon: int = Field(10, ge=1)
    time_step: float = Field(0.1, gt=0)
    lambda_speed: float = Field(0.3, ge=0)
    lambda_comfort: float = Field(0.02, ge=0)
    desired_speed: float = Field(12.0, ge=0)
    solver_tolerance: float = Field(1e-6, gt=0)
    refinement_passes: int = Field(0, ge=0, le=3)
    refinement_tolerance: float = Field(1e-3, gt=0)
    merge_arrival_guard: bool = True
    replan_every_step: bool = True
    cbf: CbfParams = Field(default_factory=CbfParams)
