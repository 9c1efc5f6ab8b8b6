"""Network checkpoints embedding the architecture configuration."""

from pathlib import Path
from typing import (
    Any,
    Dict,
    Optional,
    Tuple,
    Union,
)

import torch

from torch import nn

from ..core.errors import (
    CheckpointMismatchError,
    MissingArtifactError,
)
from .config import (
    CoFcnConfig,
    ModelKind,
)
from .network import (
    CoFcn,
    UNet,
)


__all__ = ["build_network", "save_network", "load_network", "count_parameters"]

NETWORK_SCHEMA = 1

Network = Union[CoFcn, UNet]


def build_network(
    kind: ModelKind,
    config: CoFcnConfig,
    seed: Optional[int] = None,
) -> Network:
    if ModelKind(kind) == ModelKind.COFCN:
        return CoFcn(config, seed=seed)
    return UNet(config, seed=seed)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def _kind_of(model: Network) -> ModelKind:
    return ModelKind.COFCN if isinstance(model, CoFcn) else ModelKind.UNET


def save_network(path: Path, model: Network, metadata: Optional[Dict[str, Any]] = None):
    """Saves the weights together with the model kind and configuration."""
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "schema_version": NETWORK_SCHEMA,
            "kind": _kind_of(model).value,
            "config": model.config.dict(),
            "metadata": metadata or {},
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_network(
    path: Path,
    kind: Optional[ModelKind] = None,
    config: Optional[CoFcnConfig] = None,
) -> Tuple[Network, Dict[str, Any]]:
    """Loads a saved network for inference.

    Args:
        path: The checkpoint file
        kind: If given, the model kind the checkpoint must contain
        config: If given, the architecture the checkpoint must match

    Raises:
        MissingArtifactError: If the checkpoint does not exist
        CheckpointMismatchError: If kind, configuration or schema differ

    Returns:
        The network in eval mode and the stored metadata
    """
    if not path.exists():
        raise MissingArtifactError(f"Network checkpoint {path} does not exist")
    payload: Dict[str, Any] = torch.load(path, map_location="cpu")

    if payload.get("schema_version") != NETWORK_SCHEMA:
        raise CheckpointMismatchError(
            f"{path} has schema {payload.get('schema_version')}, "
            f"expected {NETWORK_SCHEMA}"
        )
    stored_kind = ModelKind(payload["kind"])
    if kind is not None and stored_kind != ModelKind(kind):
        raise CheckpointMismatchError(
            f"{path} contains a {stored_kind.value} network, "
            f"not a {ModelKind(kind).value}"
        )
    stored_config = CoFcnConfig.parse_obj(payload["config"])
    if config is not None and stored_config != config:
        raise CheckpointMismatchError(
            f"{path} was trained with {stored_config.json()}, "
            f"cannot load it as {config.json()}"
        )

    model = build_network(stored_kind, stored_config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("metadata", {})
