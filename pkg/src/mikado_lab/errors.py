"""Exception types shared across the laboratory."""

from __future__ import annotations


class MikadoLabError(Exception):
    """Base class for laboratory-specific failures."""


class ResolutionError(MikadoLabError):
    """A grid is too coarse to resolve a requested building block.

    Carries the minimum admissible number of points per axis so callers can
    report (or retry with) a workable grid.
    """

    def __init__(self, message: str, required_n: int):
        super().__init__(message)
        self.required_n = required_n


class PlacementError(MikadoLabError):
    """No disjoint placement exists for the requested block family."""


class ContainerFormatError(MikadoLabError):
    """A binary field container is malformed.

    ``offset`` is the byte position at which decoding failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
