"""Record types shared by all pipeline stages."""

from enum import Enum
from typing import (
    NamedTuple,
    Union,
)


__all__ = ["PatchRef", "PatchLabel"]


class PatchRef(NamedTuple):
    """Identifies one grid tile of a slide.

    Tuple ordering (slide id, then column, then row) is the lexicographic
    order used wherever ties must be broken deterministically.
    """

    slide_id: str
    grid_x: int
    grid_y: int

    @property
    def key(self) -> str:
        return f"{self.slide_id}/{self.grid_x}/{self.grid_y}"


class PatchLabel(str, Enum):
    LESION = "lesion"
    NON_LESION = "non_lesion"

    @classmethod
    def lookup(cls):
        return {v: k for v, k in cls.__members__.items()}

    @classmethod
    def __get_validators__(cls):
        yield cls.validate

    @classmethod
    def validate(cls, val: Union[str, int, "PatchLabel"]) -> "PatchLabel":
        """Parses and validates `PatchLabel` input in `str`, `bit` or `Enum` encoding.

        Args:
            val: The encoded input label

        Raises:
            ValueError: if the given input is not a valid label

        Returns:
            PatchLabel enum
        """
        if isinstance(val, PatchLabel):
            return val
        if isinstance(val, int) and not isinstance(val, bool) and val in (0, 1):
            return cls.LESION if val == 1 else cls.NON_LESION

        try:
            return cls.lookup()[str(val).upper()]
        except KeyError as key_error:
            raise ValueError("invalid string PatchLabel") from key_error

    @property
    def bit(self) -> int:
        return 1 if self is PatchLabel.LESION else 0
