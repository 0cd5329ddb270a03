"""
Main FastAPI application
"""
from contextlib import asynccontextmanager

from fastapi import FastAPI

from app.api.api import api_router
from app.core.config import settings
from app.core.database import init_db
from app.core.logging import setup_logging


@asynccontextmanager
async def lifespan(app: FastAPI):
    setup_logging(settings.LOG_LEVEL)
    init_db()
    yield


# Create FastAPI application
app = FastAPI(
    title=settings.APP_NAME,
    version=settings.APP_VERSION,
    description="Mixed-traffic roundabout simulation with MPC-controlled CAVs and Safe Sequencing",
    docs_url="/docs",
    redoc_url="/redoc",
    lifespan=lifespan,
)

# Include API routers
app.include_router(api_router, prefix="/api/v1")


# Root endpoint
@app.get("/")
async def root():
    return {
        "message": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "endpoints": {
            "scenarios": {
                "presets": "/api/v1/scenarios/presets - Demand presets as resolved scenarios",
                "validate": "/api/v1/scenarios/validate - Validate a scenario document",
            },
            "runs": {
                "create": "/api/v1/runs/ - Run a scenario and store the result",
                "list": "/api/v1/runs/ - List stored runs",
                "detail": "/api/v1/runs/{run_id} - Run summary",
                "vehicles": "/api/v1/runs/{run_id}/vehicles - Per-vehicle ledger",
            },
        },
        "cli": "python -m app.cli --help",
    }
