"""Runtime settings with environment overrides."""

import os
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ConfigInvalid

ENV_BUDGET_NODES = "LINSMR_BUDGET_NODES"
ENV_BUDGET_OPS = "LINSMR_BUDGET_OPS"


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_ops: int = Field(default=10, ge=1)
    max_nodes: int = Field(default=200_000, ge=1)
    on_exhaustion: Literal["unknown", "error"] = "unknown"
    default_seed: int = 0


def load_settings(environ: dict[str, str] | None = None) -> Settings:
    """Build Settings from defaults overridden by ``LINSMR_*`` variables."""
    environ = os.environ if environ is None else environ
    overrides = {}
    if environ.get(ENV_BUDGET_NODES):
        overrides["max_nodes"] = environ[ENV_BUDGET_NODES]
    if environ.get(ENV_BUDGET_OPS):
        overrides["max_ops"] = environ[ENV_BUDGET_OPS]
    try:
        return Settings(**overrides)
    except ValidationError as exc:
        raise ConfigInvalid(f"bad environment setting: {exc.errors()[0]['msg']}") from exc
