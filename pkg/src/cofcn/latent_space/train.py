"""Per center autoencoder training with early stopping and checkpoints."""

import copy

from pathlib import Path
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Sequence,
)

import numpy as np
import torch

from structlog.stdlib import BoundLogger
from torch import nn
from torch.utils.data import (
    DataLoader,
    TensorDataset,
)

from ..core.errors import (
    CheckpointMismatchError,
    MissingArtifactError,
)
from ..core.logging import get_logger
from ..core.training import (
    EarlyStopping,
    EpochMetrics,
    seed_everything,
    split_indices,
)
from ..patch_pipeline.config import PatchRecord
from ..patch_pipeline.manifest import PatchStore
from .autoencoder import ConvAutoencoder
from .config import AutoencoderConfig


__all__ = [
    "AutoencoderCheckpoint",
    "fit_autoencoder",
    "train_autoencoder",
    "reconstruction_loss",
]

CHECKPOINT_SCHEMA = 1


class AutoencoderCheckpoint:
    """Trained autoencoder weights together with their provenance."""

    def __init__(
        self,
        state_dict: Dict[str, torch.Tensor],
        config: AutoencoderConfig,
        center_id: int,
        history: Optional[List[EpochMetrics]] = None,
    ):
        self.state_dict = state_dict
        self.config = config
        self.center_id = center_id
        self.history: List[EpochMetrics] = history or []

    def build_model(self) -> ConvAutoencoder:
        model = ConvAutoencoder()
        model.load_state_dict(self.state_dict)
        model.eval()
        return model

    def check_center(self, center_id: int):
        if center_id != self.center_id:
            raise CheckpointMismatchError(
                f"Autoencoder of center {self.center_id} cannot embed "
                f"patches of center {center_id}"
            )

    def save(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {
                "schema_version": CHECKPOINT_SCHEMA,
                "kind": "autoencoder",
                "center_id": self.center_id,
                "config": self.config.dict(),
                "history": [m.dict() for m in self.history],
                "state_dict": self.state_dict,
            },
            path,
        )

    @classmethod
    def load(cls, path: Path) -> "AutoencoderCheckpoint":
        if not path.exists():
            raise MissingArtifactError(
                f"Autoencoder checkpoint {path} does not exist", stage="train-ae"
            )
        payload: Dict[str, Any] = torch.load(path, map_location="cpu")
        if (
            payload.get("kind") != "autoencoder"
            or payload.get("schema_version") != CHECKPOINT_SCHEMA
        ):
            raise CheckpointMismatchError(f"{path} is not an autoencoder checkpoint")
        return cls(
            state_dict=payload["state_dict"],
            config=AutoencoderConfig.parse_obj(payload["config"]),
            center_id=payload["center_id"],
            history=[EpochMetrics.parse_obj(m) for m in payload["history"]],
        )


def reconstruction_loss(reconstruction: torch.Tensor, target: torch.Tensor):
    """Mean squared reconstruction error"""
    return nn.functional.mse_loss(reconstruction, target)


def train_epoch(
    model: ConvAutoencoder,
    loader: DataLoader,
    optimizer: torch.optim.Optimizer,
) -> float:
    model.train()
    total, count = 0.0, 0
    for (batch,) in loader:
        optimizer.zero_grad()
        recon, _ = model(batch)
        loss = reconstruction_loss(recon, batch)
        loss.backward()
        optimizer.step()
        total += loss.item() * len(batch)
        count += len(batch)
    return total / count


def validate(model: ConvAutoencoder, loader: DataLoader) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for (batch,) in loader:
            recon, _ = model(batch)
            total += reconstruction_loss(recon, batch).item() * len(batch)
            count += len(batch)
    return total / count


def fit_autoencoder(
    images: np.ndarray,
    config: AutoencoderConfig,
    center_id: int,
    log: BoundLogger = None,
) -> AutoencoderCheckpoint:
    """Trains an autoencoder on `(N, 3, 128, 128)` patches in [0, 1].

    The patches are split into a training and a validation part. Training
    stops once the validation loss did not improve for
    `early_stop_patience` epochs and the best weights seen are returned.

    Args:
        images: The patch array
        config: The training configuration
        center_id: The center the patches belong to
        log: The logger to use

    Raises:
        ValueError: If fewer than two patches are given

    Returns:
        The checkpoint with the lowest validation reconstruction loss
    """
    log = (log or get_logger()).bind(center_id=center_id, model="autoencoder")
    if len(images) < 2:
        raise ValueError(
            f"Autoencoder training needs at least 2 patches, got {len(images)}"
        )

    generator = seed_everything(config.seed)
    train_idx, val_idx = split_indices(len(images), config.train_fraction, config.seed)
    data = torch.from_numpy(np.asarray(images, dtype=np.float32))
    train_loader = DataLoader(
        TensorDataset(data[train_idx]),
        batch_size=config.batch_size,
        shuffle=True,
        generator=generator,
    )
    val_loader = DataLoader(TensorDataset(data[val_idx]), batch_size=config.batch_size)

    model = ConvAutoencoder()
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )
    stopper = EarlyStopping(config.early_stop_patience)
    best_state = copy.deepcopy(model.state_dict())
    history: List[EpochMetrics] = []

    for epoch in range(1, config.max_epochs + 1):
        train_loss = train_epoch(model, train_loader, optimizer)
        val_loss = validate(model, val_loader)
        improved = stopper.step(epoch, val_loss)
        if improved:
            best_state = copy.deepcopy(model.state_dict())
        history.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=train_loss,
                val_loss=val_loss,
                learning_rate=config.learning_rate,
                improved=improved,
            )
        )
        log.debug(
            "Finished epoch", epoch=epoch, train_loss=train_loss, val_loss=val_loss
        )
        if stopper.should_stop:
            log.info("Early stopping", epoch=epoch, best_epoch=stopper.best_epoch)
            break

    log.info(
        "Trained autoencoder",
        epochs=len(history),
        best_epoch=stopper.best_epoch,
        best_val_loss=stopper.best,
    )
    return AutoencoderCheckpoint(best_state, config, center_id, history)


def train_autoencoder(
    records: Sequence[PatchRecord],
    store: PatchStore,
    config: AutoencoderConfig,
    center_id: int,
    log: BoundLogger = None,
) -> AutoencoderCheckpoint:
    """Trains the autoencoder of a center on its manifest patches.

    Raises:
        ValueError: If the records are empty or belong to another center
    """
    if not records:
        raise ValueError(f"No patches to train the autoencoder of center {center_id}")
    foreign = {r.center_id for r in records} - {center_id}
    if foreign:
        raise ValueError(
            f"Autoencoder of center {center_id} given patches of centers {foreign}"
        )
    images = np.stack([store.patch_chw(r) for r in records])
    return fit_autoencoder(images, config, center_id, log)
