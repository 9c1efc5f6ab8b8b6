import pytest
import torch

from cofcn.cofcn_model.blocks import (
    DecoderBlock,
    EncoderBlock,
    check_shape,
)
from cofcn.core.errors import ShapeMismatchError


def test_encoder_block_keeps_features_and_pools():
    block = EncoderBlock(3, 4)
    features, pooled = block(torch.rand(2, 3, 16, 16))

    assert features.shape == (2, 4, 16, 16)
    assert pooled.shape == (2, 4, 8, 8)
    assert features.min() >= 0


@pytest.mark.parametrize(
    "shape",
    [
        pytest.param((1, 2, 16, 16), id="channels"),
        pytest.param((1, 3, 15, 16), id="odd-height"),
        pytest.param((3, 16, 16), id="no-batch"),
    ],
)
def test_encoder_block_rejects_bad_input(shape):
    with pytest.raises(ShapeMismatchError):
        EncoderBlock(3, 4)(torch.rand(*shape))


def test_decoder_block_upsamples_and_merges_skip():
    block = DecoderBlock(8, 4, 5)
    out = block(torch.rand(1, 8, 4, 4), torch.rand(1, 4, 8, 8))
    assert out.shape == (1, 5, 8, 8)


def test_decoder_block_rejects_mismatched_skip():
    with pytest.raises(ShapeMismatchError):
        DecoderBlock(8, 4, 5)(torch.rand(1, 8, 4, 4), torch.rand(1, 4, 16, 16))


def test_check_shape_ignores_batch_axis():
    check_shape("x", torch.zeros(7, 2, 3), (2, 3))
    with pytest.raises(ShapeMismatchError):
        check_shape("x", torch.zeros(7, 3, 2), (2, 3))
