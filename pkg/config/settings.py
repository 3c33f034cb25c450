"""
إعدادات المشروع الرئيسية
Project Settings Configuration
"""

from typing import List
from pydantic_settings import BaseSettings
from pydantic import Field, field_validator


class Settings(BaseSettings):
    """الإعدادات الرئيسية للمشروع"""

    # General
    APP_NAME: str = "funnel-forge"
    VERSION: str = "1.0.0"
    ENVIRONMENT: str = Field(default="development")
    DEBUG: bool = Field(default=False)

    # Execution
    DEFAULT_THREADS: int = Field(default=1, ge=1)
    DEFAULT_SEED: int = Field(default=0, ge=0)
    OUTPUT_DIR: str = "results"

    # NLP solver
    NLP_TOL: float = 1e-6          # falsifier solves inside the synthesis loop
    NLP_TOL_STRICT: float = 1e-8   # solve_local default
    NLP_MAX_OUTER: int = 50
    NLP_MAX_INNER: int = 500
    MULTISTART_MAX_STARTS: int = 1000

    # Integration (RKF45)
    INTEGRATION_ABS_TOL: float = 1e-9
    INTEGRATION_REL_TOL: float = 1e-9
    INTEGRATION_MAX_STEP: float = 0.001
    INTEGRATION_MAX_STEPS: int = 10_000_000

    # Reproduction
    REPRODUCE_LINKS: List[int] = [1, 2, 3, 4, 5]

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"
    LOG_TO_FILE: bool = False
    MAX_LOG_SIZE: str = "10 MB"
    LOG_RETENTION: str = "30 days"

    model_config = {
        "env_file": ".env",
        "case_sensitive": True,
        "extra": "ignore",
    }

    @field_validator("REPRODUCE_LINKS", mode="before")
    @classmethod
    def parse_links(cls, v):
        if isinstance(v, str):
            return [int(n.strip()) for n in v.split(",") if n.strip()]
        return v


# Singleton instance
settings = Settings()
