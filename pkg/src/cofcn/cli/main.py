"""The `cofcn` command line.

Every command accepts `--config` and `--set` before or after its name;
options given after the command name win. Stage specific flags are
shorthands for config values and are applied last.
"""

import sys

from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
)

import click
import yaml

from pydantic import ValidationError

from ..core.errors import (
    CofcnError,
    MissingArtifactError,
)
from ..core.logging import (
    configure_logging,
    get_logger,
)
from ..inference_eval.config import Aggregation
from ..patch_pipeline.config import LabelingRule
from .config import (
    ProjectConfig,
    load_config,
    read_raw,
    validate_config,
)
from .stages import (
    PIPELINE,
    run_stage,
)


EXIT_FAILURE = 1
EXIT_CONFIG = 2

LABELING_CHOICES = {
    "train": LabelingRule.TRAIN_MAJORITY.value,
    "eval": LabelingRule.EVAL_ANY_PIXEL.value,
}


class Info:
    """Global options shared by all commands"""

    def __init__(
        self,
        config_path: Optional[Path],
        overrides: Tuple[str, ...],
        debug: bool,
    ):
        self.config_path = config_path
        self.overrides = tuple(overrides)
        self.debug = debug
        self.values: Dict[str, Any] = {}

    def update(
        self,
        config_path: Optional[Path],
        overrides: Sequence[str],
        values: Optional[Dict[str, Any]] = None,
    ):
        """Adds the options given after the command name"""
        if config_path is not None:
            self.config_path = config_path
        self.overrides = self.overrides + tuple(overrides)
        self.values.update(values or {})

    def load(self) -> ProjectConfig:
        return load_config(self.config_path, self.overrides, self.values)


class ConfigFlag(NamedTuple):
    """A command flag setting one or more config values"""

    decls: Tuple[str, ...]
    keys: Tuple[str, ...]
    type: Any
    help: str
    multiple: bool = False
    convert: Optional[Callable[[Any], Any]] = None

    @property
    def dest(self) -> str:
        return self.decls[0].lstrip("-").replace("-", "_")

    def option(self, func: Callable) -> Callable:
        return click.option(
            *self.decls,
            self.dest,
            type=self.type,
            multiple=self.multiple,
            default=None,
            help=self.help,
        )(func)


def flag_values(
    flags: Sequence[ConfigFlag],
    params: Dict[str, Any],
) -> Dict[str, Any]:
    """Maps the given flag values onto their dotted config paths"""
    values: Dict[str, Any] = {}
    for flag in flags:
        value = params.get(flag.dest)
        if flag.multiple:
            value = list(value) if value else None
        if value is None:
            continue
        if flag.convert is not None:
            value = flag.convert(value)
        for key in flag.keys:
            values[key] = value
    return values


def config_options(func: Callable) -> Callable:
    """Adds `--config` and `--set` to a command"""
    func = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="SECTION.KEY=VALUE",
        help="Overrides a config value, may be given multiple times",
    )(func)
    return click.option(
        "--config",
        "-c",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        default=None,
        help="The project config file (YAML)",
    )(func)


SEED = ConfigFlag(
    ("--seed",), ("seed",), int, "The global seed all stage seeds derive from"
)
SHOTS = ConfigFlag(
    ("--k",),
    ("shots",),
    int,
    "Number of support shots, may be given multiple times",
    multiple=True,
)
LESION_WEIGHT = ConfigFlag(
    ("--wl",),
    ("train.lesion_weight",),
    float,
    "Weight of lesion pixels in the weighted BCE",
)
PRETEXT_WEIGHT = ConfigFlag(
    ("--w",), ("train.pretext_weight",), float, "Weight of the pretext loss"
)
LEARNING_RATE = ConfigFlag(
    ("--lr",), ("train.learning_rate",), float, "Adam initial learning rate"
)
PATIENCE = ConfigFlag(
    ("--patience",),
    ("train.patience",),
    int,
    "Epochs without validation improvement before stopping",
)
MAX_EPOCHS = ConfigFlag(
    ("--max-epochs",), ("train.max_epochs",), int, "Maximum number of epochs"
)

STAGE_FLAGS: Dict[str, Tuple[ConfigFlag, ...]] = {
    "synthesize": (SEED,),
    "prepare": (
        ConfigFlag(
            ("--slides",),
            ("paths.slides",),
            click.Path(exists=True, file_okay=False, path_type=Path),
            "Directory holding the slides and their catalog",
        ),
        ConfigFlag(
            ("--out",),
            ("paths.workdir",),
            click.Path(file_okay=False, path_type=Path),
            "Directory the stage artifacts are written to",
        ),
        ConfigFlag(
            ("--drop-fraction",),
            ("pipeline.drop_fractions.support", "pipeline.drop_fractions.query"),
            click.FloatRange(0.0, 1.0),
            "Share of non-lesion support and query patches to drop",
        ),
        SEED,
        ConfigFlag(
            ("--labeling",),
            ("pipeline.labeling",),
            click.Choice(sorted(LABELING_CHOICES)),
            "Label every set with the training or the evaluation rule",
            convert=LABELING_CHOICES.get,
        ),
    ),
    "train-ae": (
        ConfigFlag(
            ("--lr",),
            ("autoencoder.learning_rate",),
            float,
            "Adam initial learning rate",
        ),
        ConfigFlag(
            ("--patience",),
            ("autoencoder.early_stop_patience",),
            int,
            "Epochs without validation improvement before stopping",
        ),
        ConfigFlag(
            ("--max-epochs",),
            ("autoencoder.max_epochs",),
            int,
            "Maximum number of epochs",
        ),
    ),
    "embed": (),
    "fit-pca": (
        ConfigFlag(
            ("--dims",), ("selector.pca_dims",), int, "PCA output dimensions"
        ),
    ),
    "prototypes": (
        ConfigFlag(
            ("--microcluster-dim",),
            ("selector.microcluster_dim",),
            int,
            "Support patches per k-means prototype",
        ),
    ),
    "select": (SHOTS,),
    "train-cofcn": (
        SHOTS,
        LESION_WEIGHT,
        PRETEXT_WEIGHT,
        LEARNING_RATE,
        PATIENCE,
        MAX_EPOCHS,
    ),
    "train-unet": (LESION_WEIGHT, LEARNING_RATE, PATIENCE, MAX_EPOCHS),
    "evaluate": (
        ConfigFlag(
            ("--aggregation",),
            ("evaluation.aggregation",),
            click.Choice([a.value for a in Aggregation]),
            "Reduction of the central window to a patch score",
        ),
    ),
    "compare": (),
}

_HELP = {
    "synthesize": "Generate the synthetic slide corpus and its catalog",
    "prepare": "Tile, filter, label and balance the slides into manifests",
    "train-ae": "Train one autoencoder per center on its support patches",
    "embed": "Compute the averaged latent vector of every patch",
    "fit-pca": "Fit the PCA of every center's support embeddings",
    "prototypes": "Build the lesion and non-lesion prototype pools",
    "select": "Select the support shots of every training query",
    "train-cofcn": "Train one co-FCN per configured k",
    "train-unet": "Train the U-Net baseline",
    "evaluate": "Compute per slide ROC statistics",
    "compare": "Compare every co-FCN with the U-Net (DeLong test)",
}


@click.group()
@config_options
@click.option("--debug", is_flag=True, help="Log debug messages and tracebacks")
@click.option("--json-logs", is_flag=True, help="Log JSON lines")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[Path],
    overrides: Tuple[str, ...],
    debug: bool,
    json_logs: bool,
):
    """Few-shot conditional segmentation pipeline"""
    configure_logging("DEBUG" if debug else "INFO", json_logs)
    ctx.obj = Info(config_path, overrides, debug)


def _execute(info: Info, stage: str, options: Optional[Dict[str, Any]] = None):
    log = get_logger().bind(command=stage)
    try:
        config = info.load()
    except (ValidationError, ValueError, yaml.YAMLError) as error:
        log.error("Invalid configuration", error=str(error))
        sys.exit(EXIT_CONFIG)

    try:
        run_stage(stage, config, options, log)
    except MissingArtifactError as error:
        hint = f"run {error.stage} first" if error.stage else None
        log.error("Missing artifact", error=str(error), hint=hint)
        sys.exit(EXIT_FAILURE)
    except (CofcnError, OSError, ValueError, KeyError, RuntimeError) as error:
        if info.debug:
            log.exception("Stage failed")
        else:
            log.error("Stage failed", error=str(error))
        sys.exit(EXIT_FAILURE)


def _stage_command(
    name: str,
    help_text: str,
    flags: Sequence[ConfigFlag],
) -> click.Command:
    @click.pass_obj
    def command(
        info: Info,
        config_path: Optional[Path],
        overrides: Tuple[str, ...],
        **params: Any,
    ):
        info.update(config_path, overrides, flag_values(flags, params))
        _execute(info, name)

    for flag in reversed(flags):
        command = flag.option(command)
    return click.command(name=name, help=help_text)(config_options(command))


for _stage in PIPELINE:
    if _stage.name in _HELP:
        _name = _stage.name
        cli.add_command(_stage_command(_name, _HELP[_name], STAGE_FLAGS[_name]))


@cli.command()
@config_options
@click.option(
    "--center",
    "centers",
    type=int,
    multiple=True,
    help="Cluster only this center, may be given multiple times",
)
@click.option(
    "--components",
    type=int,
    default=None,
    help="Number of GMM components per center",
)
@click.pass_obj
def cluster(
    info: Info,
    config_path: Optional[Path],
    overrides: Tuple[str, ...],
    centers: Tuple[int, ...],
    components: Optional[int],
):
    """Cluster support embeddings and estimate lesion prevalence"""
    values = {} if components is None else {"selector.n_components": components}
    info.update(config_path, overrides, values)
    _execute(info, "cluster", {"centers": list(centers)})


@cli.command()
@config_options
@click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Score only this network checkpoint",
)
@click.option("--k", "k", type=int, default=None, help="The number of support shots")
@click.pass_obj
def infer(
    info: Info,
    config_path: Optional[Path],
    overrides: Tuple[str, ...],
    model_path: Optional[Path],
    k: Optional[int],
):
    """Score the test slides with the trained networks"""
    info.update(config_path, overrides)
    _execute(info, "infer", {"model": model_path, "k": k})


@cli.command()
@config_options
@click.option(
    "--threshold",
    type=click.FloatRange(0.0, 1.0, max_open=True),
    default=None,
    help="Probabilities below this are transparent",
)
@click.pass_obj
def render(
    info: Info,
    config_path: Optional[Path],
    overrides: Tuple[str, ...],
    threshold: Optional[float],
):
    """Render lesion heatmaps over the test slides"""
    info.update(config_path, overrides)
    _execute(info, "render", {"threshold": threshold})


@cli.command(name="all")
@config_options
@click.pass_obj
def run_all(info: Info, config_path: Optional[Path], overrides: Tuple[str, ...]):
    """Run every stage in order"""
    info.update(config_path, overrides)
    _execute(info, "all")


@cli.command()
@config_options
@click.pass_obj
def validate(info: Info, config_path: Optional[Path], overrides: Tuple[str, ...]):
    """Check the configuration and print every violation"""
    info.update(config_path, overrides)
    try:
        raw = read_raw(info.config_path, info.overrides, info.values)
    except (ValueError, yaml.YAMLError) as error:
        click.echo(str(error))
        sys.exit(EXIT_CONFIG)

    violations = validate_config(raw)
    for violation in violations:
        click.echo(violation)
    if violations:
        sys.exit(EXIT_CONFIG)
    click.echo("Configuration is valid")
