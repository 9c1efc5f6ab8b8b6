import math

import pytest

from pydantic import (
    BaseModel,
    Field,
    ValidationError,
)

from cofcn.core.config import FractionConfig
from cofcn.core.errors import (
    CofcnError,
    MissingArtifactError,
    RankDeficientError,
    ShapeMismatchError,
)
from cofcn.core.util import (
    content_hash,
    derive_seed,
    format_float,
    read_models,
    write_models,
)


class ValidFractions(FractionConfig):
    a: float = Field(0.5)
    b: float = Field(1.0)


class InvalidFractions(FractionConfig):
    a: float = 0.5
    b: int = 1


class Row(BaseModel):
    name: str
    value: float


def test_fraction_config_accepts_unit_interval():
    assert ValidFractions(a=0.0, b=1.0).dict() == {"a": 0.0, "b": 1.0}


@pytest.mark.parametrize(
    "a, b",
    [
        pytest.param(-0.1, 0.5, id="negative"),
        pytest.param(0.5, 1.5, id="greater-one"),
    ],
)
def test_fraction_config_rejects_out_of_range(a, b):
    with pytest.raises(ValidationError):
        ValidFractions(a=a, b=b)


def test_fraction_config_rejects_non_float_fields():
    with pytest.raises(ValidationError):
        InvalidFractions()


def test_derive_seed_is_stable_and_stage_specific():
    assert derive_seed(42, "cluster") == derive_seed(42, "cluster")
    assert derive_seed(42, "cluster") != derive_seed(42, "embed")
    assert derive_seed(42, "cluster") != derive_seed(43, "cluster")
    assert 0 <= derive_seed(42, "cluster") < 2 ** 31


def test_content_hash_ignores_key_order():
    assert content_hash({"a": 1, "b": [1, 2]}) == content_hash({"b": [1, 2], "a": 1})
    assert content_hash({"a": 1}) != content_hash({"a": 2})


def test_format_float_round_trips():
    value = 0.1 + 0.2
    assert float(format_float(value)) == value
    assert float(format_float(math.pi)) == math.pi


def test_models_round_trip_through_jsonl(tmp_path):
    rows = [Row(name="x", value=0.1 + 0.2), Row(name="y", value=-1e-300)]
    path = tmp_path / "rows" / "rows.jsonl"
    write_models(path, rows)
    assert read_models(path, Row) == rows


def test_errors_refine_builtins():
    assert issubclass(ShapeMismatchError, ValueError)
    assert issubclass(MissingArtifactError, FileNotFoundError)
    error = RankDeficientError(rank=2, required=3)
    assert isinstance(error, CofcnError)
    assert (error.rank, error.required) == (2, 3)
    assert MissingArtifactError("missing", stage="embed").stage == "embed"
