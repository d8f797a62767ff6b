from enum import Enum
from typing import Type, TypeVar

T = TypeVar("T", bound="StrEnum")


class StrEnum(str, Enum):
    """A string-based enum, that can lookup an enum value from a string.

    The builtin ``enum.StrEnum`` has no lenient lookup, so keep our own.
    """

    @classmethod
    def from_str(cls: Type[T], s: str) -> T:
        """Look up an enum value by string."""
        for value in cls:
            if value == s or value.name == s:
                return value
        raise ValueError(f"Could not parse value from string: {s}")


class StructuralForm(StrEnum):
    """Explicit Markov-state structures recognised for a qubit system"""

    ProductRS_E = "ProductRS_E"
    ProductR_SE = "ProductR_SE"
    DirectSumQubit = "DirectSumQubit"
    NONE = "None"


class ExtensionPolicy(StrEnum):
    """How an assignment map acts outside the span of its system states"""

    PseudoInverseZero = "PseudoInverseZero"
