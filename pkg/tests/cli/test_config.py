import pytest
import yaml

from cofcn.cli.config import (
    ProjectConfig,
    apply_override,
    load_config,
    section_hash,
    set_value,
    validate_config,
)


def test_defaults_are_valid():
    assert validate_config(ProjectConfig()) == []


@pytest.mark.parametrize(
    "raw,expected",
    [
        pytest.param(
            {"shots": [1, 3]},
            "shots: k=3 is not one of (1, 2, 4, 8)",
            id="shot-count",
        ),
        pytest.param(
            {"centers": {"train": [0, 1], "test": [1, 4]}},
            "training and test slides must come from separate medical centers",
            id="overlapping-centers",
        ),
        pytest.param(
            {"centers": {"train": [5]}},
            "centers.train.0: center ids must be in 0..4",
            id="unknown-center",
        ),
        pytest.param(
            {"train": {"learning_rate": 0}},
            "train.learning_rate",
            id="learning-rate",
        ),
    ],
)
def test_violations_are_reported(raw, expected):
    violations = validate_config(raw)
    assert any(expected in violation for violation in violations), violations


def test_every_violation_is_reported():
    violations = validate_config(
        {"shots": [3], "evaluation": {"ci_level": 1.5}, "selector": {"tol": -1}}
    )
    assert len(violations) == 3


def test_validate_reads_config_files(tmp_path):
    path = tmp_path / "cofcn.yml"
    path.write_text(yaml.safe_dump({"shots": [16]}))
    assert len(validate_config(path)) == 1
    assert validate_config(tmp_path / "missing.yml") != []


@pytest.mark.parametrize(
    "assignment,expected",
    [
        pytest.param("seed=7", {"seed": 7}, id="int"),
        pytest.param("shots=[1, 2]", {"shots": [1, 2]}, id="list"),
        pytest.param(
            "train.learning_rate=0.01",
            {"train": {"learning_rate": 0.01}},
            id="nested-float",
        ),
        pytest.param(
            "paths.slides=data/slides",
            {"paths": {"slides": "data/slides"}},
            id="string",
        ),
    ],
)
def test_apply_override(assignment, expected):
    assert apply_override({}, assignment) == expected


@pytest.mark.parametrize(
    "data,assignment",
    [
        pytest.param({}, "seed", id="no-value"),
        pytest.param({}, "=3", id="no-key"),
        pytest.param({"seed": 1}, "seed.value=3", id="not-a-section"),
    ],
)
def test_malformed_overrides(data, assignment):
    with pytest.raises(ValueError):
        apply_override(data, assignment)


def test_load_config_applies_overrides_after_the_file(tmp_path):
    path = tmp_path / "cofcn.yml"
    path.write_text(
        yaml.safe_dump({"seed": 3, "shots": [8, 1], "train": {"max_epochs": 9}})
    )
    config = load_config(path, ["train.max_epochs=2"])

    assert config.seed == 3
    assert config.shots == [1, 8]
    assert config.train.max_epochs == 2
    assert config.train.patience == 3


def test_section_hash_only_covers_the_named_sections():
    base = ProjectConfig()
    other_train = ProjectConfig.parse_obj({"train": {"max_epochs": 7}})

    assert section_hash(base, ["selector"]) == section_hash(other_train, ["selector"])
    assert section_hash(base, ["train"]) != section_hash(other_train, ["train"])


def test_typed_values_are_applied_after_the_overrides(tmp_path):
    path = tmp_path / "cofcn.yml"
    path.write_text(yaml.safe_dump({"train": {"lesion_weight": 2.0}}))
    config = load_config(
        path,
        ["train.lesion_weight=3.0", "seed=5"],
        {"train.lesion_weight": 4.0, "pipeline.drop_fractions.support": 0.25},
    )

    assert config.train.lesion_weight == 4.0
    assert config.seed == 5
    assert config.pipeline.drop_fractions.support == 0.25


def test_set_value_creates_sections():
    assert set_value({}, "a.b.c", [1]) == {"a": {"b": {"c": [1]}}}


def test_set_value_rejects_scalar_sections():
    with pytest.raises(ValueError, match="'seed' is not a section"):
        set_value({"seed": 1}, "seed.value", 3)
