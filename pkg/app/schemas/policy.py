"""
Pydantic schemas for the sequencing policy
"""
from enum import Enum

from pydantic import BaseModel, Field


class SequencingPolicy(str, Enum):
    """Safe Sequencing, Baseline Sequencing, or a run without CAVs"""
    SS = "ss"
    BS = "bs"
    HDV = "hdv"


class SafePolicyParams(BaseModel):
    """Distance threshold g(a) = delta_j + eta * a**3 for merging ahead of an HDV"""
    delta_j: float = Field(10.0, ge=0)
    eta: float = Field(5.0, ge=0)

    def threshold(self, aggressiveness: float) -> float:
        return self.delta_j + self.eta * aggressiveness ** 3


class PolicyConfig(BaseModel):
    """Sequencing settings"""
    policy: SequencingPolicy = SequencingPolicy.SS
    safe: SafePolicyParams = Field(default_factory=SafePolicyParams)
    max_sequences: int = Field(64, ge=1)
