"""
This module contains various utility functions.
"""

import hashlib
import json

from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterable,
    Iterator,
    List,
    Type,
    TypeVar,
)

from pydantic import BaseModel


M = TypeVar("M", bound=BaseModel)


def positive_smaller_one(v: float) -> float:
    """Validates the given number v is 0 <= v <= 1."""
    if v > 1 or v < 0:
        raise ValueError("must be 0 <= f <= 1!")
    return v


def open_unit_interval(v: float) -> float:
    """Validates the given number v is 0 < v < 1."""
    if v >= 1 or v <= 0:
        raise ValueError("must be 0 < f < 1!")
    return v


def greater_zero(v: float) -> float:
    """Validates the given number v is v > 0"""
    if v <= 0:
        raise ValueError("must be > 0!")
    return v


def greater_equal_one(v: float) -> float:
    """Validates the given number v is v>=1"""
    if v < 1:
        raise ValueError("must be >= 1!")
    return v


def derive_seed(seed: int, name: str) -> int:
    """Derives an independent, reproducible seed for a named stage.

    Args:
        seed: The global seed
        name: The stage (or sub task) name

    Returns:
        A seed in `[0, 2**31)`
    """
    digest = hashlib.sha256(f"{seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 31)


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def content_hash(data: Any) -> str:
    """SHA-256 hex digest of the canonical JSON encoding of `data`"""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def format_float(value: float) -> str:
    """Formats a float with 17 significant digits (round trip safe)."""
    return format(value, ".17g")


def write_jsonl(path: Path, rows: Iterable[Dict[str, Any]]):
    """Writes one JSON object per line (UTF-8, insertion ordered keys)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as out:
        for row in rows:
            out.write(json.dumps(row, ensure_ascii=False))
            out.write("\n")


def read_jsonl(path: Path) -> Iterator[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as source:
        for line in source:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_models(path: Path, models: Iterable[BaseModel]):
    """Writes pydantic models as line-delimited JSON records."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as out:
        for model in models:
            out.write(model.json())
            out.write("\n")


def read_models(path: Path, model_class: Type[M]) -> List[M]:
    return [model_class.parse_obj(row) for row in read_jsonl(path)]
