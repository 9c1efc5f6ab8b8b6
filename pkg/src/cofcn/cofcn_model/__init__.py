"""Conditional fully convolutional network and baseline U-Net."""

from .blocks import (
    DecoderBlock,
    EncoderBlock,
)
from .checkpoint import (
    build_network,
    count_parameters,
    load_network,
    save_network,
)
from .config import (
    CoFcnConfig,
    ModelKind,
)
from .network import (
    CoFcn,
    CoFcnOutput,
    UNet,
    cofcn_forward,
    unet_forward,
)


__all__ = [
    "CoFcn",
    "CoFcnConfig",
    "CoFcnOutput",
    "DecoderBlock",
    "EncoderBlock",
    "ModelKind",
    "UNet",
    "build_network",
    "cofcn_forward",
    "count_parameters",
    "load_network",
    "save_network",
    "unet_forward",
]
