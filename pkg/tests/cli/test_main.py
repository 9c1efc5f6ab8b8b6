import pytest

from click.testing import CliRunner
from pytest_mock import MockFixture

from cofcn.cli.main import (
    EXIT_CONFIG,
    EXIT_FAILURE,
    cli,
)
from cofcn.patch_pipeline.config import LabelingRule


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def test_help_lists_every_stage(runner):
    result = runner.invoke(cli, ["--help"])

    assert result.exit_code == 0
    for command in ("synthesize", "prepare", "train-ae", "infer", "render", "all"):
        assert command in result.output


def test_validate_accepts_defaults(runner):
    result = runner.invoke(cli, ["validate"])

    assert result.exit_code == 0
    assert "Configuration is valid" in result.output


def test_validate_prints_violations(runner):
    result = runner.invoke(cli, ["--set", "shots=[3]", "validate"])

    assert result.exit_code == EXIT_CONFIG
    assert "shots: k=3 is not one of (1, 2, 4, 8)" in result.output


def test_validate_reads_the_config_file(runner, tmp_path):
    path = tmp_path / "cofcn.yml"
    path.write_text("centers:\n  train: [0, 1]\n  test: [1]\n")
    result = runner.invoke(cli, ["--config", str(path), "validate"])

    assert result.exit_code == EXIT_CONFIG
    assert "separate medical centers" in result.output


def test_invalid_config_aborts_a_stage(runner, tmp_path):
    result = runner.invoke(
        cli, ["--set", f"paths.workdir={tmp_path}", "--set", "seed=x", "prepare"]
    )
    assert result.exit_code == EXIT_CONFIG


def test_missing_upstream_stage_fails(runner, tmp_path):
    result = runner.invoke(cli, ["--set", f"paths.workdir={tmp_path}", "cluster"])
    assert result.exit_code == EXIT_FAILURE


def test_render_threshold_must_be_below_one(runner):
    result = runner.invoke(cli, ["render", "--threshold", "1.0"])
    assert result.exit_code == 2


def _stage_call(run_stage):
    run_stage.assert_called_once()
    stage, config, options, _ = run_stage.call_args.args
    return stage, config, options


@pytest.fixture
def run_stage(mocker: MockFixture):
    return mocker.patch("cofcn.cli.main.run_stage")


def test_stage_commands_accept_a_config_file(runner, run_stage, tmp_path):
    path = tmp_path / "cofcn.yml"
    path.write_text("seed: 11\n")
    result = runner.invoke(cli, ["prepare", "--config", str(path)])

    assert result.exit_code == 0, result.output
    stage, config, _ = _stage_call(run_stage)
    assert stage == "prepare"
    assert config.seed == 11


def test_command_config_replaces_the_group_config(runner, run_stage, tmp_path):
    first = tmp_path / "first.yml"
    first.write_text("seed: 1\n")
    second = tmp_path / "second.yml"
    second.write_text("seed: 2\n")
    result = runner.invoke(
        cli,
        ["-c", str(first), "--set", "train.max_epochs=4", "train-unet"]
        + ["-c", str(second)],
    )

    assert result.exit_code == 0, result.output
    _, config, _ = _stage_call(run_stage)
    assert config.seed == 2
    assert config.train.max_epochs == 4


@pytest.mark.parametrize(
    "command,flag",
    [
        pytest.param("train-cofcn", flag, id=f"train-cofcn{flag}")
        for flag in ("--k", "--wl", "--w", "--lr", "--patience")
    ]
    + [
        pytest.param("prepare", flag, id=f"prepare{flag}")
        for flag in (
            "--slides",
            "--out",
            "--drop-fraction",
            "--seed",
            "--labeling",
        )
    ]
    + [
        pytest.param("cluster", "--center", id="cluster--center"),
        pytest.param("cluster", "--components", id="cluster--components"),
        pytest.param("prototypes", "--microcluster-dim", id="prototypes--dim"),
        pytest.param("select", "--k", id="select--k"),
    ]
    + [
        pytest.param(command, "--config", id=f"{command}--config")
        for command in ("prepare", "cluster", "infer", "render", "all", "validate")
    ],
)
def test_stage_help_lists_flags(runner, command, flag):
    result = runner.invoke(cli, [command, "--help"])

    assert result.exit_code == 0
    assert flag in result.output


def test_train_cofcn_flags_set_training_values(runner, run_stage):
    result = runner.invoke(
        cli,
        ["train-cofcn", "--k", "2", "--k", "4", "--wl", "3.5", "--w", "0.2"]
        + ["--lr", "0.01", "--patience", "7"],
    )

    assert result.exit_code == 0, result.output
    stage, config, options = _stage_call(run_stage)
    assert stage == "train-cofcn"
    assert options is None
    assert config.shots == [2, 4]
    assert config.train.lesion_weight == 3.5
    assert config.train.pretext_weight == 0.2
    assert config.train.learning_rate == 0.01
    assert config.train.patience == 7


def test_flags_win_over_set_overrides(runner, run_stage):
    result = runner.invoke(
        cli, ["--set", "train.lesion_weight=2.0", "train-unet", "--wl", "5"]
    )

    assert result.exit_code == 0, result.output
    _, config, _ = _stage_call(run_stage)
    assert config.train.lesion_weight == 5.0


def test_prepare_flags_set_pipeline_values(runner, run_stage, tmp_path):
    slides = tmp_path / "slides"
    slides.mkdir()
    out = tmp_path / "work"
    result = runner.invoke(
        cli,
        ["prepare", "--slides", str(slides), "--out", str(out)]
        + ["--drop-fraction", "0.5", "--seed", "9", "--labeling", "eval"],
    )

    assert result.exit_code == 0, result.output
    _, config, _ = _stage_call(run_stage)
    assert config.paths.slides == slides
    assert config.paths.workdir == out
    assert config.seed == 9
    assert config.pipeline.drop_fractions.support == 0.5
    assert config.pipeline.drop_fractions.query == 0.5
    assert config.pipeline.drop_fractions.test == 0.0
    assert config.pipeline.labeling == LabelingRule.EVAL_ANY_PIXEL


def test_prepare_keeps_per_role_labeling_by_default(runner, run_stage):
    result = runner.invoke(cli, ["prepare"])

    assert result.exit_code == 0, result.output
    _, config, _ = _stage_call(run_stage)
    assert config.pipeline.labeling is None


def test_cluster_flags(runner, run_stage):
    result = runner.invoke(
        cli, ["cluster", "--center", "0", "--center", "2", "--components", "4"]
    )

    assert result.exit_code == 0, result.output
    stage, config, options = _stage_call(run_stage)
    assert stage == "cluster"
    assert options == {"centers": [0, 2]}
    assert config.selector.n_components == 4


def test_selector_flags(runner, run_stage):
    result = runner.invoke(cli, ["prototypes", "--microcluster-dim", "5"])

    assert result.exit_code == 0, result.output
    _, config, _ = _stage_call(run_stage)
    assert config.selector.microcluster_dim == 5


def test_invalid_flag_value_is_a_config_error(runner, run_stage):
    result = runner.invoke(cli, ["select", "--k", "3"])

    assert result.exit_code == EXIT_CONFIG
    run_stage.assert_not_called()


def test_validate_sees_command_options(runner):
    result = runner.invoke(cli, ["validate", "--set", "shots=[3]"])

    assert result.exit_code == EXIT_CONFIG
    assert "k=3 is not one of" in result.output
