"""
Shared fixtures: a default layout, limits and an API client on a throwaway registry
"""
import pytest
from fastapi.testclient import TestClient
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.core.database import get_db, init_db
from app.main import app
from app.schemas.controller import ControllerConfig
from app.schemas.layout import LayoutConfig
from app.schemas.vehicle import IdmParams, VehicleLimits
from app.services.geometry_service import RoundaboutLayout


@pytest.fixture
def layout() -> RoundaboutLayout:
    """Three control zones, 60 m entry roads and 60 m ring arcs"""
    return RoundaboutLayout.from_config(LayoutConfig())


@pytest.fixture
def limits() -> VehicleLimits:
    return VehicleLimits()


@pytest.fixture
def idm() -> IdmParams:
    return IdmParams()


@pytest.fixture
def controller_config() -> ControllerConfig:
    return ControllerConfig()


@pytest.fixture
def client(tmp_path):
    """TestClient whose run registry lives in a temporary SQLite file"""
    engine = create_engine(f"sqlite:///{tmp_path / 'runs.db'}", connect_args={"check_same_thread": False})
    TestingSession = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    init_db(bind=engine)

    def override_get_db():
        db = TestingSession()
        try:
            yield db
        finally:
            db.close()

    app.dependency_overrides[get_db] = override_get_db
    yield TestClient(app)
    app.dependency_overrides.clear()
    engine.dispose()
