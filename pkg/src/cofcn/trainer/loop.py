"""Training loops of the conditional FCN and the U-Net baseline."""

import copy

from typing import (
    Callable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
)

import numpy as np
import torch

from structlog.stdlib import BoundLogger
from torch.utils.data import DataLoader

from ..cofcn_model.checkpoint import (
    Network,
    build_network,
)
from ..cofcn_model.config import (
    CoFcnConfig,
    ModelKind,
)
from ..core.logging import get_logger
from ..core.model import PatchRef
from ..core.training import (
    EarlyStopping,
    EpochMetrics,
    seed_everything,
)
from ..patch_pipeline.config import PatchRecord
from ..patch_pipeline.manifest import PatchStore
from ..support_selector.config import SupportAssignment
from .config import TrainConfig
from .data import (
    PatchDataset,
    QueryPairDataset,
    split_records,
)
from .losses import (
    total_loss,
    weighted_bce,
)


__all__ = ["TrainResult", "train", "batch_loss"]


class TrainResult(NamedTuple):
    model: Network
    """The network with the best validation weights"""

    history: List[EpochMetrics]
    best_epoch: int


def batch_loss(
    model: Network,
    batch: Sequence[torch.Tensor],
    config: TrainConfig,
) -> torch.Tensor:
    """Loss of one batch; the U-Net is trained on the weighted BCE only"""
    if isinstance(batch, (list, tuple)) and len(batch) == 4:
        query, support, target, pi = batch
        out = model(query, support)
        return total_loss(
            out.seg_prob,
            target,
            out.cond_map,
            pi,
            config.lesion_weight,
            config.pretext_weight,
        )
    query, target = batch
    return weighted_bce(model(query), target, config.lesion_weight)


def train_epoch(
    model: Network,
    loader: DataLoader,
    optimizer: torch.optim.Optimizer,
    config: TrainConfig,
) -> float:
    model.train()
    total, count = 0.0, 0
    for batch in loader:
        optimizer.zero_grad()
        loss = batch_loss(model, batch, config)
        loss.backward()
        optimizer.step()
        total += loss.item() * len(batch[0])
        count += len(batch[0])
    return total / count


def validate(model: Network, loader: DataLoader, config: TrainConfig) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in loader:
            total += batch_loss(model, batch, config).item() * len(batch[0])
            count += len(batch[0])
    return total / count


def train(
    model_kind: ModelKind,
    records: Sequence[PatchRecord],
    store: PatchStore,
    config: TrainConfig,
    architecture: Optional[CoFcnConfig] = None,
    assignments: Optional[Mapping[PatchRef, SupportAssignment]] = None,
    support_tensor: Optional[Callable[[SupportAssignment], np.ndarray]] = None,
    log: BoundLogger = None,
) -> TrainResult:
    """Trains a network with Adam and early stopping.

    The records are split into training and validation parts. Training
    stops at `max_epochs` or once the validation loss did not improve for
    `patience` consecutive epochs; the best validation weights are kept.

    Args:
        model_kind: `cofcn` or `unet`
        records: The training patches (query set for the co-FCN, the union
            of support and query sets for the U-Net)
        store: The raster store
        config: The training configuration
        architecture: The network architecture (its `k_shots` is taken
            from `config`)
        assignments: Support assignments per query patch (co-FCN only)
        support_tensor: Loads the support tensor of an assignment (co-FCN only)
        log: The logger to use

    Raises:
        ValueError: If the records cannot be split into non-empty parts
        MissingArtifactError: If a co-FCN query has no support assignment

    Returns:
        The best model and the per epoch metrics
    """
    kind = ModelKind(model_kind)
    log = (log or get_logger()).bind(model=kind.value, k=config.k_shots)
    architecture = (architecture or CoFcnConfig()).copy(
        update={"k_shots": config.k_shots}
    )

    generator = seed_everything(config.seed)
    train_records, val_records = split_records(
        records, config.train_fraction, config.seed
    )
    if kind == ModelKind.COFCN:
        if assignments is None or support_tensor is None:
            raise ValueError("co-FCN training needs support assignments")
        train_set: PatchDataset = QueryPairDataset(
            train_records, store, assignments, support_tensor
        )
        val_set: PatchDataset = QueryPairDataset(
            val_records, store, assignments, support_tensor
        )
    else:
        train_set = PatchDataset(train_records, store)
        val_set = PatchDataset(val_records, store)

    train_loader = DataLoader(
        train_set, batch_size=config.batch_size, shuffle=True, generator=generator
    )
    val_loader = DataLoader(val_set, batch_size=config.batch_size)

    model = build_network(kind, architecture, seed=config.seed)
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
    )
    stopper = EarlyStopping(config.patience)
    best_state = copy.deepcopy(model.state_dict())
    history: List[EpochMetrics] = []
    log.info(
        "Starting training",
        n_train=len(train_set),
        n_validation=len(val_set),
        max_epochs=config.max_epochs,
    )

    for epoch in range(1, config.max_epochs + 1):
        train_loss = train_epoch(model, train_loader, optimizer, config)
        val_loss = validate(model, val_loader, config)
        improved = stopper.step(epoch, val_loss)
        if improved:
            best_state = copy.deepcopy(model.state_dict())
        metrics = EpochMetrics(
            epoch=epoch,
            train_loss=train_loss,
            val_loss=val_loss,
            learning_rate=optimizer.param_groups[0]["lr"],
            improved=improved,
        )
        history.append(metrics)
        log.info("Finished epoch", **metrics.dict())
        if stopper.should_stop:
            log.info("Early stopping", epoch=epoch, best_epoch=stopper.best_epoch)
            break

    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model=model, history=history, best_epoch=stopper.best_epoch)
