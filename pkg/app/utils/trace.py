"""
JSON-lines run trace
"""
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.schemas.scenario import TraceMode


def _clean(value: Any) -> Any:
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    if hasattr(value, "value"):
        return value.value
    return value


class RunTrace:
    """Ordered event records; contains no wall-clock data so equal seeds give equal bytes"""

    def __init__(self, mode: TraceMode = TraceMode.SUMMARY):
        self.mode = mode
        self.records: List[Dict[str, Any]] = []

    @property
    def enabled(self) -> bool:
        return self.mode != TraceMode.OFF

    @property
    def full(self) -> bool:
        return self.mode == TraceMode.FULL

    def emit(self, event: str, time: float, **payload: Any) -> None:
        if not self.enabled:
            return
        self.records.append({"event": event, "t": round(time, 9), **payload})

    def states(self, time: float, vehicles: List[Dict[str, Any]]) -> None:
        if self.full:
            self.emit("states", time, vehicles=vehicles)

    def lines(self) -> List[str]:
        return [json.dumps(_clean(r), sort_keys=True) for r in self.records]

    def dumps(self) -> str:
        lines = self.lines()
        return "\n".join(lines) + ("\n" if lines else "")

    def write(self, path: Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    def of_kind(self, event: str) -> List[Dict[str, Any]]:
        return [r for r in self.records if r["event"] == event]

    def first(self, event: str) -> Optional[Dict[str, Any]]:
        found = self.of_kind(event)
        return found[0] if found else None
