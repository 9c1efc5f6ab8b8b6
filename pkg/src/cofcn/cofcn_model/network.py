"""The two branch conditional FCN and the conditioning free U-Net baseline.

Both networks share the segmentation branch topology: four encoder levels,
a bottleneck at the lowest resolution, four decoder levels with skip
connections and a 2 class softmax head. In the conditional network the
conditioning branch processes every support shot with shared weights; the
shot features are aggregated across shots and concatenated onto the
segmentation encoder output of every level before pooling and onto the
outputs of the three deepest decoder levels.
"""

from typing import (
    List,
    NamedTuple,
    Optional,
)

import numpy as np
import torch

from torch import nn

from ..core.errors import ShapeMismatchError
from .blocks import (
    DecoderBlock,
    EncoderBlock,
    check_shape,
    conv_bn_relu,
)
from .config import CoFcnConfig


__all__ = [
    "CoFcnOutput",
    "ConditioningFeatures",
    "ConditioningBranch",
    "SegmentationBranch",
    "CoFcn",
    "UNet",
    "cofcn_forward",
    "unet_forward",
    "init_weights",
]


class CoFcnOutput(NamedTuple):
    seg_prob: torch.Tensor
    """Lesion class probability `(N, H, W)`"""

    cond_map: torch.Tensor
    """Conditioning classifier logits `(N, k, H, W)`"""

    cond_score: torch.Tensor
    """Sigmoid of the mean of `cond_map`, `(N,)`"""

    background_prob: torch.Tensor
    """Background class probability `(N, H, W)`"""


class ConditioningFeatures(NamedTuple):
    encoder: List[torch.Tensor]
    """Shot aggregated encoder outputs of levels 1..4"""

    decoder: List[torch.Tensor]
    """Shot aggregated decoder outputs of levels 4, 3 and 2"""

    cond_map: torch.Tensor
    cond_score: torch.Tensor


def init_weights(module: nn.Module, seed: Optional[int] = None):
    """He initialisation of all convolutions, optionally seeded."""

    def _init():
        for layer in module.modules():
            if isinstance(layer, nn.Conv2d):
                nn.init.kaiming_normal_(layer.weight, nonlinearity="relu")
                if layer.bias is not None:
                    nn.init.zeros_(layer.bias)
            elif isinstance(layer, nn.BatchNorm2d):
                nn.init.ones_(layer.weight)
                nn.init.zeros_(layer.bias)

    if seed is None:
        _init()
    else:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            _init()


def _aggregate(per_shot: List[torch.Tensor]) -> torch.Tensor:
    # sorting along the shot axis makes the mean exactly order independent
    stacked = torch.stack(per_shot, dim=1)
    return torch.sort(stacked, dim=1).values.mean(dim=1)


class ConditioningBranch(nn.Module):
    """U-Net over single support shots with a per shot 1x1 classifier."""

    def __init__(self, config: CoFcnConfig):
        super().__init__()
        self.config = config
        enc = config.encoder_channels
        dec = config.decoder_channels
        widths = (config.seg_in_channels,) + tuple(enc)

        self.encoders = nn.ModuleList(
            [EncoderBlock(widths[i], widths[i + 1]) for i in range(len(enc))]
        )
        self.bottleneck = conv_bn_relu(enc[-1], enc[-1])
        self.decoders = nn.ModuleList()
        previous = enc[-1]
        for level in reversed(range(len(enc))):
            self.decoders.append(DecoderBlock(previous, enc[level], dec[level]))
            previous = dec[level]
        self.classifier = nn.Conv2d(dec[0], 1, kernel_size=1)

    def _single_shot(self, shot: torch.Tensor):
        skips = []
        x = shot
        for encoder in self.encoders:
            features, x = encoder(x)
            skips.append(features)
        x = self.bottleneck(x)
        decoded = []
        for decoder, skip in zip(self.decoders, reversed(skips)):
            x = decoder(x, skip)
            decoded.append(x)
        return skips, decoded[:-1], self.classifier(x)

    def forward(self, support: torch.Tensor) -> ConditioningFeatures:
        cfg = self.config
        size = cfg.spatial_dims[0]
        if support.dim() != 4 or support.shape[1] != cfg.cond_in_channels:
            raise ShapeMismatchError(
                f"conditioning input: expected {cfg.cond_in_channels} channels "
                f"(3 x {cfg.k_shots} shots), got shape {tuple(support.shape)}"
            )
        check_shape("conditioning input", support, (cfg.cond_in_channels, size, size))

        channels = cfg.seg_in_channels
        encoder_shots: List[List[torch.Tensor]] = []
        decoder_shots: List[List[torch.Tensor]] = []
        logits = []
        for j in range(cfg.k_shots):
            shot = support[:, j * channels : (j + 1) * channels]
            skips, decoded, logit = self._single_shot(shot)
            encoder_shots.append(skips)
            decoder_shots.append(decoded)
            logits.append(logit)

        cond_map = torch.cat(logits, dim=1)
        shot_means = torch.sort(cond_map.mean(dim=(2, 3)), dim=1).values
        cond_score = torch.sigmoid(shot_means.mean(dim=1))
        return ConditioningFeatures(
            encoder=[_aggregate(list(level)) for level in zip(*encoder_shots)],
            decoder=[_aggregate(list(level)) for level in zip(*decoder_shots)],
            cond_map=cond_map,
            cond_score=cond_score,
        )


class SegmentationBranch(nn.Module):
    """Encoder decoder producing a 2 class softmax map.

    With `conditioned=True` every encoder level and the three deepest
    decoder levels expect the matching conditioning features to be
    concatenated onto their outputs, doubling those widths.
    """

    def __init__(self, config: CoFcnConfig, conditioned: bool = True):
        super().__init__()
        self.config = config
        self.conditioned = conditioned
        enc = config.encoder_channels
        dec = config.decoder_channels
        factor = 2 if conditioned else 1

        in_widths = [config.seg_in_channels] + [c * factor for c in enc[:-1]]
        self.encoders = nn.ModuleList(
            [EncoderBlock(in_widths[i], enc[i]) for i in range(len(enc))]
        )
        self.bottleneck = conv_bn_relu(enc[-1] * factor, enc[-1])

        self.decoders = nn.ModuleList()
        previous = enc[-1]
        for level in reversed(range(len(enc))):
            self.decoders.append(
                DecoderBlock(previous, enc[level] * factor, dec[level])
            )
            previous = dec[level] * (factor if level > 0 else 1)
        self.head = nn.Conv2d(dec[0], 2, kernel_size=1)

    def forward(
        self,
        query: torch.Tensor,
        conditioning: Optional[ConditioningFeatures] = None,
    ) -> torch.Tensor:
        cfg = self.config
        size = cfg.spatial_dims[0]
        check_shape("query", query, (cfg.seg_in_channels, size, size))
        if self.conditioned and conditioning is None:
            raise ValueError("Conditioned segmentation branch needs conditioning input")

        skips = []
        x = query
        for level, encoder in enumerate(self.encoders):
            features = encoder.features(x)
            if self.conditioned:
                cond = conditioning.encoder[level]
                check_shape(
                    f"encoder level {level + 1}",
                    cond,
                    features.shape[1:],
                )
                features = torch.cat([features, cond], dim=1)
            skips.append(features)
            x = encoder.pool(features)

        x = self.bottleneck(x)
        for position, (decoder, skip) in enumerate(zip(self.decoders, reversed(skips))):
            x = decoder(x, skip)
            if self.conditioned and position < len(self.decoders) - 1:
                cond = conditioning.decoder[position]
                level = len(self.decoders) - position
                check_shape(f"decoder level {level}", cond, x.shape[1:])
                x = torch.cat([x, cond], dim=1)

        return torch.softmax(self.head(x), dim=1)


class CoFcn(nn.Module):
    """Conditional FCN: segmentation of a query guided by k support shots"""

    def __init__(self, config: CoFcnConfig, seed: Optional[int] = None):
        super().__init__()
        self.config = config
        self.conditioning = ConditioningBranch(config)
        self.segmentation = SegmentationBranch(config, conditioned=True)
        init_weights(self, seed)

    def forward(self, query: torch.Tensor, support: torch.Tensor) -> CoFcnOutput:
        if support.shape[0] != query.shape[0]:
            raise ShapeMismatchError(
                f"query batch {query.shape[0]} != support batch {support.shape[0]}"
            )
        conditioning = self.conditioning(support)
        probs = self.segmentation(query, conditioning)
        return CoFcnOutput(
            seg_prob=probs[:, 1],
            cond_map=conditioning.cond_map,
            cond_score=conditioning.cond_score,
            background_prob=probs[:, 0],
        )


class UNet(nn.Module):
    """The segmentation branch without any conditioning input"""

    def __init__(self, config: CoFcnConfig, seed: Optional[int] = None):
        super().__init__()
        self.config = config
        self.segmentation = SegmentationBranch(config, conditioned=False)
        init_weights(self, seed)

    def forward(self, query: torch.Tensor) -> torch.Tensor:
        """Lesion probability `(N, H, W)`"""
        return self.segmentation(query)[:, 1]


def cofcn_forward(model: CoFcn, query: np.ndarray, support: np.ndarray) -> CoFcnOutput:
    """Runs one `(3, H, W)` query and its `(3k, H, W)` support in inference mode.

    Returns:
        The output with the batch axis removed, as numpy arrays
    """
    model.eval()
    with torch.no_grad():
        out = model(
            torch.from_numpy(np.asarray(query, np.float32))[None],
            torch.from_numpy(np.asarray(support, np.float32))[None],
        )
    return CoFcnOutput(*(t[0].numpy() for t in out))


def unet_forward(model: UNet, query: np.ndarray) -> np.ndarray:
    model.eval()
    with torch.no_grad():
        prob = model(torch.from_numpy(np.asarray(query, np.float32))[None])
    return prob[0].numpy()
