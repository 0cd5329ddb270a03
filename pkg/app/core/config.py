"""
Centralized application configuration
"""
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings"""

    # Run registry
    DATABASE_URL: str = "sqlite:///./runs.db"

    # Experiment output
    OUTPUT_DIR: str = "out"
    SWEEP_WORKERS: int = 1

    # Application configuration
    APP_NAME: str = "Roundabout Safe Sequencing Simulator"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"


# Global configuration instance
settings = Settings()
