from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8")

    APP_NAME: str = "belief-types"
    ENV: str = "development"
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["json", "text"] = "json"

    OUTPUT_DIR: str = "./runs"
    DEFAULT_SEED: int = 20240101
    # missing-answer code when an ingest schema leaves it out
    MISSING_CODE: str = Field(default="NA", min_length=1)

    # Anchoring prior: eta = ETA_DIAG on the anchor category, ETA_OFF elsewhere
    ETA_DIAG: float = Field(default=10.0, gt=0)
    ETA_OFF: float = Field(default=1.0, gt=0)
    ALPHA: float = Field(default=1.0, gt=0)

    V0: float = Field(default=2.0, gt=0)
    S0: float = Field(default=0.5, gt=0)
    SGLD_A: float = Field(default=0.01, gt=0)
    SGLD_B: float = Field(default=1.0, gt=0)
    SGLD_C: float = Field(default=0.5, gt=0, le=1)

    SCREE_THRESHOLD: float = Field(default=0.90, gt=0, lt=1)
    RARE_THRESHOLD: float = Field(default=0.01, gt=0, lt=1)
    CREDIBLE_LEVEL: float = Field(default=0.90, gt=0, lt=1)

    MAX_WORKERS: int = Field(default=4, ge=1)
    SHOW_PROGRESS: bool = False


settings = Settings()
