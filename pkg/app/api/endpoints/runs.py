"""
Run endpoints: execute a scenario and browse the run registry
"""
from typing import List, Optional

from fastapi import APIRouter, Depends, HTTPException, status
from sqlalchemy.orm import Session

from app.core.database import get_db
from app.core.exceptions import SimulationError
from app.schemas.run import RunRequest, RunResponse, VehicleRecordResponse
from app.services.run_service import RunService

router = APIRouter()


# ============================================================================
# EXECUTION
# ============================================================================

@router.post("/", response_model=RunResponse, status_code=status.HTTP_201_CREATED)
def create_run(request: RunRequest, db: Session = Depends(get_db)):
    """Run one scenario synchronously and store the result"""
    try:
        config = request.resolved()
        return RunService.execute(db, config)
    except SimulationError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))


# ============================================================================
# REGISTRY
# ============================================================================

@router.get("/", response_model=List[RunResponse])
async def list_runs(
    scenario: Optional[str] = None,
    policy: Optional[str] = None,
    skip: int = 0,
    limit: int = 100,
    db: Session = Depends(get_db),
):
    """List stored runs, optionally filtered by scenario or policy"""
    return RunService.list_runs(db, scenario=scenario, policy=policy, skip=skip, limit=limit)


@router.get("/{run_id}", response_model=RunResponse)
async def get_run(run_id: int, db: Session = Depends(get_db)):
    """Get one run with its summary"""
    run = RunService.get_run(db, run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return run


@router.get("/{run_id}/vehicles", response_model=List[VehicleRecordResponse])
async def get_run_vehicles(run_id: int, db: Session = Depends(get_db)):
    """Per-vehicle ledger rows of a run"""
    vehicles = RunService.get_vehicles(db, run_id)
    if vehicles is None:
        raise HTTPException(status_code=404, detail="Run not found")
    return vehicles
