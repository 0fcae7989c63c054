import logging
import os

from pydantic import BaseModel, Field, ValidationError, field_validator

from .engine import Mode

# --- Configuration ---
ENV_PREFIX = "DOFLAB_"


class Settings(BaseModel):
    seed: int = Field(default=0, ge=0)
    mode: Mode = Mode.FIELD
    threads: int = Field(default=1, ge=1)
    log_level: str = "WARNING"
    max_trials: int = Field(default=10_000, ge=1)

    @field_validator("mode", mode="before")
    @classmethod
    def _parse_mode(cls, value):
        return Mode.parse(value) if isinstance(value, str) else value

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if not isinstance(logging.getLevelName(value), int):
            raise ValueError(f"unknown log level {value!r}")
        return value


def load_settings(environ=None) -> Settings:
    """Reads DOFLAB_* variables; a bad value stops startup with ValueError."""
    environ = os.environ if environ is None else environ
    raw = {
        name: environ[ENV_PREFIX + name.upper()]
        for name in Settings.model_fields
        if ENV_PREFIX + name.upper() in environ
    }
    try:
        return Settings(**raw)
    except ValidationError as e:
        raise ValueError(f"invalid doflab environment: {e}") from None
