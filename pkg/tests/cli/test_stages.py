import csv
import json

import pytest

from pytest_mock import MockFixture

from cofcn.cli.config import ProjectConfig
from cofcn.cli.stages import (
    PIPELINE,
    STAGES,
    StageContext,
    StageMarker,
    run_stage,
)
from cofcn.cofcn_model.checkpoint import load_network
from cofcn.core.errors import MissingArtifactError
from cofcn.inference_eval.predict import read_prediction
from cofcn.patch_pipeline.config import SetRole
from cofcn.patch_pipeline.manifest import read_catalog


def _tiny_project(workdir) -> ProjectConfig:
    return ProjectConfig.parse_obj(
        {
            "seed": 1,
            "shots": [1, 2],
            "paths": {"workdir": str(workdir)},
            "centers": {"train": [0], "test": [3]},
            "synthetic": {
                "slides_per_center": 2,
                "support_slides": 1,
                "width": 512,
                "height": 512,
                "lesions": {"count": 2, "radius_min": 20, "radius_max": 40},
            },
            "pipeline": {
                "drop_fractions": {"support": 0.0, "query": 0.0, "test": 0.0}
            },
            "autoencoder": {"max_epochs": 1, "batch_size": 8},
            "selector": {"n_components": 1, "microcluster_dim": 1, "pca_dims": 2},
            "model": {
                "encoder_channels": [4, 4, 8, 8],
                "decoder_channels": [4, 4, 4, 8],
            },
            "train": {"max_epochs": 1, "batch_size": 4},
        }
    )


def test_pipeline_order():
    assert [stage.name for stage in PIPELINE] == [
        "synthesize",
        "prepare",
        "train-ae",
        "embed",
        "fit-pca",
        "cluster",
        "prototypes",
        "select",
        "train-cofcn",
        "train-unet",
        "infer",
        "evaluate",
        "compare",
        "render",
    ]
    for stage in PIPELINE:
        for req in stage.requires:
            assert PIPELINE.index(STAGES[req]) < PIPELINE.index(stage)


def test_unknown_stage(tmp_path):
    with pytest.raises(KeyError):
        run_stage("deploy", _tiny_project(tmp_path))


def test_missing_upstream_stage_is_named(tmp_path):
    with pytest.raises(MissingArtifactError) as error:
        run_stage("cluster", _tiny_project(tmp_path))

    assert error.value.stage == "embed"
    assert "run embed first" in str(error.value)


def _six_slide_project(workdir) -> ProjectConfig:
    return ProjectConfig.parse_obj(
        {
            "seed": 1,
            "shots": [2],
            "paths": {"workdir": str(workdir)},
            "centers": {"train": [0], "test": [3]},
            "synthetic": {
                "slides_per_center": 3,
                "support_slides": 1,
                "width": 512,
                "height": 512,
                "lesions": {"count": 4, "radius_min": 40, "radius_max": 56},
            },
            "pipeline": {
                "drop_fractions": {"support": 0.0, "query": 0.0, "test": 0.0}
            },
            "autoencoder": {"max_epochs": 1, "batch_size": 8},
            "selector": {"n_components": 1, "microcluster_dim": 1, "pca_dims": 2},
            "model": {
                "encoder_channels": [4, 4, 8, 8],
                "decoder_channels": [4, 4, 4, 8],
            },
            "train": {
                "max_epochs": 50,
                "patience": 50,
                "batch_size": 4,
                "learning_rate": 0.01,
                "pretext_weight": 0.01,
            },
        }
    )


def _report_bytes(workdir):
    return {
        path.relative_to(workdir).as_posix(): path.read_bytes()
        for stage in ("evaluate-v1", "compare-v1")
        for path in sorted((workdir / stage).iterdir())
    }


def test_full_pipeline_on_a_six_slide_corpus(tmp_path):
    workdir = tmp_path / "work"
    config = _six_slide_project(workdir)
    markers = run_stage("all", config)

    assert [m.stage for m in markers] == [stage.name for stage in PIPELINE]
    for marker in markers:
        stored = StageMarker.parse_file(workdir / "stages" / f"{marker.stage}.json")
        assert stored == marker
        for artifact in marker.artifacts:
            assert (workdir / artifact).exists()
    embed = json.loads((workdir / "stages" / "embed.json").read_text())
    assert set(embed["upstream"]) == {"train-ae"}

    catalog = read_catalog(workdir / "synthesize-v1")
    assert [s.center_id for s in catalog] == [0, 0, 0, 3, 3, 3]
    assert [s.set_role for s in catalog] == [
        SetRole.SUPPORT,
        SetRole.QUERY,
        SetRole.QUERY,
        SetRole.SUPPORT,
        SetRole.TEST,
        SetRole.TEST,
    ]

    _, metadata = load_network(workdir / "train-cofcn-v1" / "cofcn-k2.pt")
    assert metadata["k"] == 2
    assert min(m["train_loss"] for m in metadata["history"]) < 0.1

    assert sorted(p.name for p in (workdir / "infer-v1").iterdir()) == [
        "cofcn-k2",
        "unet",
    ]
    unet = [
        read_prediction(path)
        for path in sorted((workdir / "infer-v1" / "unet").glob("*.jsonl"))
    ]
    scored = sorted(p.slide_id for p in unet if len(set(p.labels.tolist())) == 2)
    assert scored

    with open(workdir / "compare-v1" / "report.tsv", encoding="utf-8") as source:
        rows = list(csv.DictReader(source, delimiter="\t"))
    assert sorted(row["slide_id"] for row in rows) == scored
    for row in rows:
        assert row["k"] == "2"
        assert row["sig_code"] in {"", ".", "*", "**", "***"}
        assert 0.0 <= float(row["p_value"]) <= 1.0
    assert (workdir / "compare-v1" / "report.txt").read_text().startswith("slide")
    assert list((workdir / "render-v1" / "unet").glob("*.png"))

    reports = _report_bytes(workdir)
    rerun = run_stage("all", config)
    assert rerun == markers
    assert _report_bytes(workdir) == reports


@pytest.mark.parametrize(
    "options,expected",
    [
        pytest.param({}, [0, 1, 2], id="all-centers"),
        pytest.param({"centers": [2, 0]}, [0, 2], id="subset"),
    ],
)
def test_cluster_stage_center_selection(
    mocker: MockFixture, tmp_path, options, expected
):
    mocker.patch.object(StageContext, "support_centers", return_value=[0, 1, 2])
    ctx = StageContext(_tiny_project(tmp_path), options)

    assert STAGES["cluster"]._centers(ctx) == expected


def test_cluster_stage_rejects_centers_without_support(mocker: MockFixture, tmp_path):
    mocker.patch.object(StageContext, "support_centers", return_value=[0, 1])
    ctx = StageContext(_tiny_project(tmp_path), {"centers": [1, 5]})

    with pytest.raises(ValueError, match=r"Centers \[5\] have no support patches"):
        STAGES["cluster"]._centers(ctx)
