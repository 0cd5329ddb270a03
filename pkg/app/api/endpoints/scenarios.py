"""
Scenario endpoints: demand presets and document validation
"""
from typing import Any, Dict

from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from app.core.exceptions import SimulationError
from app.schemas.run import PresetList
from app.schemas.scenario import DEMAND_PRESETS, ScenarioConfig
from app.services.geometry_service import RoundaboutLayout

router = APIRouter()


@router.get("/presets", response_model=PresetList)
async def list_presets():
    """The balanced, unbalanced and heavy demand scenarios"""
    return PresetList(presets={name: ScenarioConfig.preset(name) for name in DEMAND_PRESETS})


@router.post("/validate", response_model=ScenarioConfig)
async def validate_scenario(document: Dict[str, Any]):
    """Resolve a scenario document and check that its layout can be built"""
    try:
        config = ScenarioConfig.model_validate(document)
        RoundaboutLayout.from_config(config.layout)
    except ValidationError as e:
        raise HTTPException(status_code=422, detail=e.errors(include_url=False, include_context=False))
    except SimulationError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    return config
