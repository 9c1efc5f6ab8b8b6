"""Project configuration, pipeline stages and the command line."""

from .config import (
    ProjectConfig,
    load_config,
    validate_config,
)
from .stages import (
    STAGES,
    StageMarker,
    run_stage,
)


__all__ = [
    "ProjectConfig",
    "STAGES",
    "StageMarker",
    "load_config",
    "run_stage",
    "validate_config",
]
