"""
Pydantic schemas for roundabout geometry
"""
import math
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

CIRCUMFERENCE_TOLERANCE = 1e-9


class LayoutConfig(BaseModel):
    """Single-lane roundabout with one entry road and one ring arc per control zone.

    Single-element length lists are broadcast to every control zone.
    """
    num_entries: int = Field(3, ge=2)
    entry_lengths: List[float] = Field(default_factory=lambda: [60.0])
    curve_lengths: List[float] = Field(default_factory=lambda: [60.0])
    ring_radius: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def check_lengths(self) -> "LayoutConfig":
        for name in ("entry_lengths", "curve_lengths"):
            values = getattr(self, name)
            if len(values) == 1:
                values = values * self.num_entries
                setattr(self, name, values)
            if len(values) != self.num_entries:
                raise ValueError(f"{name} needs 1 or {self.num_entries} values, got {len(values)}")
            if any(length <= 0 for length in values):
                raise ValueError(f"{name} must be strictly positive")

        if self.ring_radius is not None:
            circumference = sum(self.curve_lengths)
            if abs(2.0 * math.pi * self.ring_radius - circumference) > CIRCUMFERENCE_TOLERANCE:
                raise ValueError(
                    f"ring_radius {self.ring_radius} does not match the curve lengths "
                    f"(circumference {circumference} m)"
                )
        return self

    @property
    def resolved_radius(self) -> float:
        if self.ring_radius is not None:
            return self.ring_radius
        return sum(self.curve_lengths) / (2.0 * math.pi)
