"""Runtime configuration, overridable through ``EPSLENS_*`` environment variables."""

from __future__ import annotations

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class EpslensSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="EPSLENS_", extra="ignore", frozen=True)

    # max (row, column) pairs an exact chain search accepts
    size_guard: int = Field(default=400, ge=1)
    search_node_budget: int = Field(default=5_000_000, ge=1)
    exact_cover_max_rows: int = Field(default=10, ge=1)
    closed_family_cap: int = Field(default=1 << 16, ge=2)
    median_max_rows: int = Field(default=7, ge=1)
    tolerance: float = Field(default=1e-9, ge=0.0)
    log_level: str = "WARNING"


@lru_cache(maxsize=1)
def get_settings() -> EpslensSettings:
    return EpslensSettings()


def reset_settings_cache() -> None:
    """Drop the cached settings so the next ``get_settings`` re-reads the environment."""
    get_settings.cache_clear()
