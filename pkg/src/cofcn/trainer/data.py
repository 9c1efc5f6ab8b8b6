"""Datasets and splits for network training."""

from typing import (
    Callable,
    List,
    Mapping,
    Sequence,
    Tuple,
)

import numpy as np
import torch

from torch.utils.data import Dataset

from ..core.errors import MissingArtifactError
from ..core.model import PatchRef
from ..core.training import split_indices
from ..patch_pipeline.config import PatchRecord
from ..patch_pipeline.manifest import PatchStore
from ..support_selector.config import SupportAssignment


__all__ = ["split_records", "PatchDataset", "QueryPairDataset"]


def split_records(
    records: Sequence[PatchRecord],
    train_fraction: float,
    seed: int,
) -> Tuple[List[PatchRecord], List[PatchRecord]]:
    """Seeded train/validation split keeping the original record order."""
    if not records:
        raise ValueError("Cannot split an empty record set")
    train_idx, val_idx = split_indices(len(records), train_fraction, seed)
    return [records[i] for i in train_idx], [records[i] for i in val_idx]


class PatchDataset(Dataset):
    """(query, mask) samples"""

    def __init__(self, records: Sequence[PatchRecord], store: PatchStore):
        self.records = list(records)
        self.store = store

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, idx: int):
        record = self.records[idx]
        query = torch.from_numpy(self.store.patch_chw(record).astype(np.float32))
        target = torch.from_numpy(self.store.patch_mask(record).astype(np.float32))
        return query, target


class QueryPairDataset(PatchDataset):
    """(query, k-shot support, mask, prevalence) samples"""

    def __init__(
        self,
        records: Sequence[PatchRecord],
        store: PatchStore,
        assignments: Mapping[PatchRef, SupportAssignment],
        support_tensor: Callable[[SupportAssignment], np.ndarray],
    ):
        super().__init__(records, store)
        missing = [r.ref for r in self.records if r.ref not in assignments]
        if missing:
            raise MissingArtifactError(
                f"{len(missing)} query patches have no support assignment, "
                f"e.g. {missing[0]}",
                stage="select",
            )
        self.assignments = assignments
        self.support_tensor = support_tensor

    def __getitem__(self, idx: int):
        query, target = super().__getitem__(idx)
        assignment = self.assignments[self.records[idx].ref]
        support = torch.from_numpy(self.support_tensor(assignment).astype(np.float32))
        return query, support, target, torch.tensor(assignment.pi, dtype=torch.float32)
