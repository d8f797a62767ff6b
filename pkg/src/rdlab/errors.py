"""Exceptions raised by rdlab.

Everything derives from ``ValueError`` so callers that only care about bad input
can catch that.
"""
from typing import Optional


class RdlabError(ValueError):
    pass


class MissingDimsError(RdlabError):
    pass


class ShapeMismatchError(RdlabError):
    pass


class DimMismatchError(RdlabError):
    pass


class NotUnitaryError(RdlabError):
    pass


class NotHermitianError(RdlabError):
    pass


class NotPSDError(RdlabError):
    pass


class InvalidStateError(RdlabError):
    pass


class RankDeficientError(RdlabError):
    pass


class NotHermitianPreservingError(RdlabError):
    pass


class NotTracelessError(RdlabError):
    pass


class NotInSubspaceError(RdlabError):
    pass


class ZeroProbabilityError(RdlabError):
    pass


class OutOfDomainError(RdlabError):
    pass


class InconsistentMarginalsError(RdlabError):
    """A joint state whose environment marginal is not the paired system state"""

    def __init__(self, index: int, deviation: Optional[float] = None) -> None:
        self.index = index
        self.deviation = deviation
        message = f"Tr_E(joint[{index}]) does not match system[{index}]"
        if deviation is not None:
            message += f" (max deviation {deviation:.3e})"
        super().__init__(message)


class MalformedFileError(RdlabError):
    """An input file parsed but does not have the expected layout"""
