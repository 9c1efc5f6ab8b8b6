import numpy as np
import pytest

from pytest_mock import MockFixture

from cofcn.cofcn_model.config import ModelKind
from cofcn.cofcn_model.network import (
    CoFcn,
    UNet,
)
from cofcn.core.errors import MissingArtifactError
from cofcn.patch_pipeline.config import LabelingRule
from cofcn.patch_pipeline.manifest import extract_patches
from cofcn.support_selector.config import SupportAssignment
from cofcn.trainer.config import TrainConfig
from cofcn.trainer.data import split_records
from cofcn.trainer.loop import train


@pytest.fixture
def records(slide_on_disk, store):
    return extract_patches(slide_on_disk, LabelingRule.TRAIN_MAJORITY, store)


@pytest.fixture
def assignments(records):
    refs = [r.ref for r in records]
    return {
        ref: SupportAssignment(
            query_ref=ref, cluster_id=0, pi=0.5, shot_classes=[1, 0], shots=refs
        )
        for ref in refs
    }


def _config(**update) -> TrainConfig:
    return TrainConfig(
        **{
            "k_shots": 2,
            "train_fraction": 0.5,
            "max_epochs": 2,
            "batch_size": 1,
            **update,
        }
    )


def test_split_keeps_record_order(make_record):
    records = [make_record(grid_x=i) for i in range(8)]
    train_part, val_part = split_records(records, 0.75, seed=3)

    assert len(train_part) == 6
    assert len(val_part) == 2
    assert sorted(train_part + val_part, key=lambda r: r.ref) == records
    assert train_part == sorted(train_part, key=lambda r: r.grid_x)
    with pytest.raises(ValueError):
        split_records([], 0.75, seed=3)


def test_unet_training_run(records, store, tiny_architecture):
    result = train(
        ModelKind.UNET, records, store, _config(), architecture=tiny_architecture()
    )

    assert isinstance(result.model, UNet)
    assert not result.model.training
    assert 1 <= len(result.history) <= 2
    assert result.best_epoch in (1, 2)
    assert all(np.isfinite(m.train_loss) for m in result.history)


def test_cofcn_training_run(records, store, assignments, tiny_architecture):
    by_ref = {r.ref: r for r in records}

    def support_tensor(assignment):
        return np.concatenate(
            [store.patch_chw(by_ref[ref]) for ref in assignment.shots]
        )

    result = train(
        ModelKind.COFCN,
        records,
        store,
        _config(max_epochs=1),
        architecture=tiny_architecture(8),
        assignments=assignments,
        support_tensor=support_tensor,
    )

    assert isinstance(result.model, CoFcn)
    assert result.model.config.k_shots == 2
    assert len(result.history) == 1
    assert result.best_epoch == 1


def test_cofcn_training_needs_every_assignment(records, store, tiny_architecture):
    with pytest.raises(MissingArtifactError) as error:
        train(
            ModelKind.COFCN,
            records,
            store,
            _config(),
            architecture=tiny_architecture(),
            assignments={},
            support_tensor=lambda assignment: None,
        )
    assert error.value.stage == "select"


def test_training_stops_early_and_keeps_best_epoch(
    records, store, tiny_architecture, mocker: MockFixture
):
    validate = mocker.patch(
        "cofcn.trainer.loop.validate",
        side_effect=[1.0, 0.5, 0.6, 0.7, 0.8, 0.9],
    )
    result = train(
        ModelKind.UNET,
        records,
        store,
        _config(max_epochs=6, patience=3),
        architecture=tiny_architecture(),
    )

    assert validate.call_count == 5
    assert result.best_epoch == 2
    assert [m.improved for m in result.history] == [True, True, False, False, False]
