"""
Main API configuration
"""
from fastapi import APIRouter
from app.api.endpoints import runs, scenarios

# Create main API router
api_router = APIRouter()

# Include endpoint routers
api_router.include_router(scenarios.router, prefix="/scenarios", tags=["scenarios"])
api_router.include_router(runs.router, prefix="/runs", tags=["runs"])
