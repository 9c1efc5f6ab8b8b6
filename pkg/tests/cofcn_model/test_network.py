import numpy as np
import pytest
import torch

from pydantic import ValidationError

from cofcn.cofcn_model.checkpoint import (
    build_network,
    count_parameters,
    load_network,
    save_network,
)
from cofcn.cofcn_model.config import (
    CoFcnConfig,
    ModelKind,
)
from cofcn.cofcn_model.network import (
    CoFcn,
    UNet,
    cofcn_forward,
    unet_forward,
)
from cofcn.core.errors import (
    CheckpointMismatchError,
    MissingArtifactError,
    ShapeMismatchError,
)


@pytest.fixture
def query() -> torch.Tensor:
    torch.manual_seed(0)
    return torch.rand(1, 3, 128, 128)


@pytest.fixture
def support() -> torch.Tensor:
    torch.manual_seed(1)
    return torch.rand(1, 6, 128, 128)


def test_output_shapes_and_probabilities(tiny_architecture, query, support):
    model = CoFcn(tiny_architecture(2), seed=0).eval()
    with torch.no_grad():
        out = model(query, support)

    assert out.seg_prob.shape == (1, 128, 128)
    assert out.background_prob.shape == (1, 128, 128)
    assert out.cond_map.shape == (1, 2, 128, 128)
    assert out.cond_score.shape == (1,)
    assert torch.allclose(
        out.seg_prob + out.background_prob, torch.ones(1, 128, 128), atol=1e-6
    )
    assert 0 < float(out.cond_score) < 1


def test_shot_order_does_not_change_the_segmentation(
    tiny_architecture, query, support
):
    model = CoFcn(tiny_architecture(2), seed=0).eval()
    swapped = torch.cat([support[:, 3:], support[:, :3]], dim=1)
    with torch.no_grad():
        a = model(query, support)
        b = model(query, swapped)

    assert torch.allclose(a.seg_prob, b.seg_prob, atol=1e-6)
    assert torch.allclose(a.cond_score, b.cond_score, atol=1e-6)
    assert torch.equal(a.cond_map[:, 0], b.cond_map[:, 1])


def test_support_channels_must_match_k(tiny_architecture, query, support):
    model = CoFcn(tiny_architecture(4), seed=0)
    with pytest.raises(ShapeMismatchError):
        model(query, support)


def test_query_size_must_match_ladder(tiny_architecture):
    model = UNet(tiny_architecture(1), seed=0)
    with pytest.raises(ShapeMismatchError):
        model(torch.rand(1, 3, 64, 64))


def test_batches_must_agree(tiny_architecture, query):
    model = CoFcn(tiny_architecture(1), seed=0)
    with pytest.raises(ShapeMismatchError):
        model(query, torch.rand(2, 3, 128, 128))


def test_unet_is_the_smaller_network(tiny_architecture):
    config = tiny_architecture(2)
    assert count_parameters(UNet(config)) < count_parameters(CoFcn(config))


def test_seeded_initialisation_is_reproducible(tiny_architecture):
    a = CoFcn(tiny_architecture(2), seed=5).state_dict()
    b = CoFcn(tiny_architecture(2), seed=5).state_dict()
    assert all(torch.equal(a[key], b[key]) for key in a)


def test_numpy_forward_helpers(tiny_architecture, query, support):
    config = tiny_architecture(2)
    out = cofcn_forward(CoFcn(config, seed=0), query[0].numpy(), support[0].numpy())
    prob = unet_forward(UNet(config, seed=0), query[0].numpy())

    assert out.seg_prob.shape == (128, 128)
    assert isinstance(out.seg_prob, np.ndarray)
    assert prob.shape == (128, 128)
    assert np.all((prob >= 0) & (prob <= 1))


@pytest.mark.parametrize(
    "kind",
    [
        pytest.param(ModelKind.COFCN, id="cofcn"),
        pytest.param(ModelKind.UNET, id="unet"),
    ],
)
def test_checkpoint_round_trip(tiny_architecture, query, support, tmp_path, kind):
    config = tiny_architecture(2)
    model = build_network(kind, config, seed=3).eval()
    path = tmp_path / f"{kind.value}.pt"
    save_network(path, model, {"best_epoch": 4})

    loaded, metadata = load_network(path, kind=kind, config=config)
    assert metadata == {"best_epoch": 4}
    assert type(loaded) is type(model)
    with torch.no_grad():
        if kind == ModelKind.COFCN:
            assert torch.equal(
                model(query, support).seg_prob, loaded(query, support).seg_prob
            )
        else:
            assert torch.equal(model(query), loaded(query))


def test_checkpoint_mismatches(tiny_architecture, tmp_path):
    path = tmp_path / "cofcn.pt"
    save_network(path, CoFcn(tiny_architecture(2), seed=0))

    with pytest.raises(CheckpointMismatchError):
        load_network(path, kind=ModelKind.UNET)
    with pytest.raises(CheckpointMismatchError):
        load_network(path, config=tiny_architecture(4))
    with pytest.raises(MissingArtifactError):
        load_network(tmp_path / "missing.pt")


@pytest.mark.parametrize(
    "update",
    [
        pytest.param({"k_shots": 3}, id="k-not-allowed"),
        pytest.param({"spatial_dims": (128, 64, 30, 16, 8)}, id="ladder"),
        pytest.param({"encoder_channels": (4, 0, 8, 8)}, id="zero-width"),
    ],
)
def test_invalid_architecture(update):
    with pytest.raises(ValidationError):
        CoFcnConfig(**update)


def _record_shapes(modules, shapes):
    def hook(module, inputs, output):
        shapes.append(tuple(output.shape[1:]))

    return [module.register_forward_hook(hook) for module in modules]


def test_default_feature_ladder():
    config = CoFcnConfig()
    model = CoFcn(config, seed=0).eval()
    seg, cond = model.segmentation, model.conditioning
    names = ("seg_enc", "bottleneck", "seg_dec", "cond_enc", "cond_dec")
    shapes = {name: [] for name in names}
    handles = (
        _record_shapes([e.conv for e in seg.encoders], shapes["seg_enc"])
        + _record_shapes(seg.decoders, shapes["seg_dec"])
        + _record_shapes([e.conv for e in cond.encoders], shapes["cond_enc"])
        + _record_shapes(cond.decoders, shapes["cond_dec"])
        + _record_shapes([seg.bottleneck], shapes["bottleneck"])
    )
    torch.manual_seed(2)
    with torch.no_grad():
        out = model(torch.rand(1, 3, 128, 128), torch.rand(1, 24, 128, 128))
    for handle in handles:
        handle.remove()

    encoder_ladder = [(32, 128, 128), (64, 64, 64), (128, 32, 32), (256, 16, 16)]
    decoder_ladder = [(128, 16, 16), (64, 32, 32), (32, 64, 64), (32, 128, 128)]
    assert config.cond_in_channels == 24
    assert shapes["seg_enc"] == encoder_ladder
    assert shapes["bottleneck"] == [(256, 8, 8)]
    assert shapes["seg_dec"] == decoder_ladder
    # the conditioning branch runs once per shot with shared weights
    assert shapes["cond_enc"] == encoder_ladder * 8
    assert shapes["cond_dec"] == decoder_ladder * 8
    assert out.cond_map.shape == (1, 8, 128, 128)
    assert out.seg_prob.shape == (1, 128, 128)


def test_default_eight_shot_support_permutation():
    model = CoFcn(CoFcnConfig(k_shots=8), seed=0).eval()
    torch.manual_seed(3)
    query = torch.rand(1, 3, 128, 128)
    support = torch.rand(1, 24, 128, 128)
    order = [5, 2, 7, 0, 3, 6, 1, 4]
    permuted = torch.cat([support[:, 3 * j : 3 * j + 3] for j in order], dim=1)

    with torch.no_grad():
        a = model(query, support)
        b = model(query, permuted)

    assert torch.allclose(b.cond_map, a.cond_map[:, order], atol=1e-6)
    assert torch.equal(a.cond_score, b.cond_score)
    assert torch.allclose(a.seg_prob, b.seg_prob, atol=1e-6)


def test_default_eight_shot_network_rejects_six_channels():
    model = CoFcn(CoFcnConfig(k_shots=8), seed=0)
    with pytest.raises(ShapeMismatchError):
        model(torch.rand(1, 3, 128, 128), torch.rand(1, 6, 128, 128))
