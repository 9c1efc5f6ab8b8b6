"""
This module contains configuration base classes and helpers,
which are shared by the configuration models of all pipeline modules.
"""

from typing import (
    Any,
    Dict,
)

from pydantic import (
    BaseModel,
    Field,
    root_validator,
    validator,
)


class SeededConfig(BaseModel):
    """Base class for configurations of randomized operations."""

    seed: int = Field(
        0,
        description="The seed making the operation reproducible",
    )


class FractionConfig(BaseModel):
    """Base class for configuration groups consisting only of fractions.

    This base class already defines validators checking that every field is
    a float in the closed unit interval.
    """

    @validator("*")
    def check_value_range(cls, v: float) -> float:
        """Validates the value range for all fraction fields.

        Args:
            v: A fraction fields value

        Raises:
            ValueError: If the number range is invalid

        Returns:
            The validated field value
        """
        if 0 <= v <= 1:
            return v
        raise ValueError("Fraction value must be between 0.0 and 1.0!")

    @root_validator(pre=True)
    def check_all_field_types(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        """Verifies that all config fields are fraction value fields.

        !!! Note
            This is only checked once the sub class is actually used to load
            a configuration.

        Args:
            values: Dictionary containing all fields

        Raises:
            ValueError: If a invalid field value type is detected

        Returns:
            The fields dictionary
        """
        for key, val in cls.__fields__.items():
            field_type = val.type_
            if not issubclass(field_type, float):
                raise ValueError(
                    (
                        "Fraction config fields must be float! "
                        f"Found {key}: {field_type}"
                    )
                )
        return values
