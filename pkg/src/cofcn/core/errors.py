"""Exception types raised by the cofcn toolkit.

Every error derives from [`CofcnError`][cofcn.core.errors.CofcnError] and from
the builtin exception it refines, so callers may catch either.
"""

from typing import Optional


class CofcnError(Exception):
    """Base class for all toolkit errors"""


class ShapeMismatchError(CofcnError, ValueError):
    """An array or tensor does not have the expected shape"""


class EmptyGridError(CofcnError, ValueError):
    """An image is too small to hold a single patch"""


class NonFiniteInputError(CofcnError, ValueError):
    """Input values contain NaN or infinity"""


class RankDeficientError(CofcnError, ValueError):
    """Data does not span enough dimensions for the requested decomposition"""

    def __init__(self, rank: int, required: int):
        super().__init__(
            f"Data is rank deficient: rank {rank} < {required} required dimensions"
        )
        self.rank = rank
        self.required = required


class EmptyPoolError(CofcnError, LookupError):
    """No prototype is left to serve as a support shot"""


class MissingArtifactError(CofcnError, FileNotFoundError):
    """An upstream artifact required by an operation does not exist"""

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.stage = stage


class CheckpointMismatchError(CofcnError, ValueError):
    """A checkpoint does not match the model or center it is loaded for"""


class SingleClassError(CofcnError, ValueError):
    """ROC statistics need at least one positive and one negative sample"""
