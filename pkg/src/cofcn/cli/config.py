"""Project configuration: one section per pipeline module."""

from pathlib import Path
from typing import (
    Any,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
)

import yaml

from pydantic import (
    BaseModel,
    Field,
    ValidationError,
    root_validator,
    validator,
)

from ..cofcn_model.config import (
    ALLOWED_SHOTS,
    CoFcnConfig,
)
from ..core.util import content_hash
from ..inference_eval.config import EvaluationConfig
from ..latent_space.config import AutoencoderConfig
from ..patch_pipeline.config import (
    N_CENTERS,
    PipelineConfig,
    SyntheticConfig,
)
from ..support_selector.config import SelectorConfig
from ..trainer.config import TrainConfig


__all__ = [
    "PathsConfig",
    "CentersConfig",
    "ProjectConfig",
    "apply_override",
    "set_value",
    "load_config",
    "read_raw",
    "validate_config",
    "section_hash",
]


class PathsConfig(BaseModel):
    slides: Optional[Path] = Field(
        None,
        description=(
            "Directory holding the slide rasters and the slide catalog "
            "(defaults to the output of the synthesize stage)"
        ),
    )

    workdir: Path = Field(
        Path("work"),
        description="Directory all stage artifacts are written to",
    )


class CentersConfig(BaseModel):
    """Partition of the medical centers into training and test centers"""

    train: List[int] = Field(
        [0, 1, 2],
        description="Centers whose slides are used for training",
    )

    test: List[int] = Field(
        [3, 4],
        description="Centers whose slides are only used for evaluation",
    )

    @validator("train", "test", each_item=True)
    def check_center_id(cls, v: int) -> int:
        assert 0 <= v < N_CENTERS, f"center ids must be in 0..{N_CENTERS - 1}"
        return v

    @validator("train", "test")
    def check_not_empty(cls, v: List[int]) -> List[int]:
        assert v, "at least one center is required"
        assert len(set(v)) == len(v), "center ids must be unique"
        return v

    @root_validator(skip_on_failure=True)
    def check_disjoint(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        overlap = sorted(set(values["train"]) & set(values["test"]))
        assert not overlap, (
            "training and test slides must come from separate medical centers, "
            f"centers {overlap} are in both sets"
        )
        return values

    @property
    def all_centers(self) -> List[int]:
        return sorted(self.train + self.test)


class ProjectConfig(BaseModel):
    """The complete pipeline configuration

    Example:
        ```yaml
        seed: 42
        shots: [1, 2, 4, 8]
        paths:
            slides: data/slides
            workdir: data/work
        centers:
            train: [0, 1, 2]
            test: [3, 4]
        train:
            max_epochs: 30
        evaluation:
            aggregation: min
        ```
    """

    seed: int = Field(0, description="The global seed all stage seeds derive from")

    shots: List[int] = Field(
        list(ALLOWED_SHOTS),
        description="The k values co-FCNs are trained and evaluated with",
    )

    paths: PathsConfig = Field(PathsConfig(), description="File system locations")

    centers: CentersConfig = Field(
        CentersConfig(),
        description="Training and test center partition",
    )

    synthetic: SyntheticConfig = Field(
        SyntheticConfig(),
        description="Synthetic slide corpus generation",
    )

    pipeline: PipelineConfig = Field(
        PipelineConfig(),
        description="Tiling, tissue filtering and balancing",
    )

    autoencoder: AutoencoderConfig = Field(
        AutoencoderConfig(),
        description="Per center autoencoder training",
    )

    selector: SelectorConfig = Field(
        SelectorConfig(),
        description="GMM clustering and prototype pools",
    )

    model: CoFcnConfig = Field(
        CoFcnConfig(),
        description="Network architecture (k is set per trained model)",
    )

    train: TrainConfig = Field(
        TrainConfig(),
        description="co-FCN and U-Net training (k is set per trained model)",
    )

    evaluation: EvaluationConfig = Field(
        EvaluationConfig(),
        description="Inference, statistics and heatmap rendering",
    )

    @validator("shots")
    def check_shots(cls, v: List[int]) -> List[int]:
        assert v, "at least one k is required"
        for k in v:
            assert k in ALLOWED_SHOTS, f"k={k} is not one of {ALLOWED_SHOTS}"
        assert len(set(v)) == len(v), "k values must be unique"
        return sorted(v)


def _parse_scalar(value: str) -> Any:
    return yaml.safe_load(value) if value != "" else ""


def set_value(data: Dict[str, Any], path: str, value: Any) -> Dict[str, Any]:
    """Sets the dotted `section.key` path of a raw config mapping to `value`.

    Raises:
        ValueError: If a prefix of the path is not a section
    """
    keys = path.strip().split(".")
    node = data
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ValueError(f"Config path '{path}': '{key}' is not a section")
        node = child
    node[keys[-1]] = value
    return data


def apply_override(data: Dict[str, Any], assignment: str) -> Dict[str, Any]:
    """Applies one `section.key=value` assignment to a raw config mapping.

    The value is parsed as a YAML scalar or flow collection, so `4`,
    `0.5`, `true` and `[1, 2]` keep their types.

    Raises:
        ValueError: If the assignment is malformed
    """
    path, sep, value = assignment.partition("=")
    if not sep or not path.strip():
        raise ValueError(f"Invalid override '{assignment}', expected key=value")
    return set_value(data, path, _parse_scalar(value.strip()))


def read_raw(
    path: Optional[Path],
    overrides: Sequence[str],
    values: Optional[Mapping[str, Any]] = None,
) -> Dict[str, Any]:
    """Reads the config file, then applies the overrides and the typed values"""
    data: Dict[str, Any] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as config_file:
            data = yaml.safe_load(config_file) or {}
        if not isinstance(data, dict):
            raise ValueError(f"Config file {path} must contain a mapping")
    for assignment in overrides:
        apply_override(data, assignment)
    for key, value in (values or {}).items():
        set_value(data, key, value)
    return data


def load_config(
    path: Optional[Path] = None,
    overrides: Sequence[str] = (),
    values: Optional[Mapping[str, Any]] = None,
) -> ProjectConfig:
    """Loads the project config file and applies command line overrides.

    Raises:
        pydantic.ValidationError: If the resulting config is invalid
        ValueError: If the file or an override is malformed
    """
    return ProjectConfig.parse_obj(read_raw(path, overrides, values))


def _violations(error: ValidationError) -> List[str]:
    return [
        f"{'.'.join(str(loc) for loc in err['loc'])}: {err['msg']}"
        for err in error.errors()
    ]


def validate_config(config: Any) -> List[str]:
    """Lists every rule the given config violates.

    Args:
        config: A `ProjectConfig`, a raw mapping or a config file path

    Returns:
        Human readable violations; empty if the config is valid
    """
    try:
        if isinstance(config, ProjectConfig):
            config = config.dict()
        elif isinstance(config, (str, Path)):
            config = read_raw(Path(config), ())
        ProjectConfig.parse_obj(config)
    except ValidationError as error:
        return _violations(error)
    except (OSError, ValueError, yaml.YAMLError) as error:
        return [str(error)]
    return []


def section_hash(config: ProjectConfig, sections: Sequence[str]) -> str:
    """SHA-256 of the canonical JSON of the named config sections"""
    data = config.dict(include=set(sections))
    return content_hash({key: data[key] for key in sorted(data)})
