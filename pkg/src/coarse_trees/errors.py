"""Exception hierarchy.

Every error carries an optional ``witness`` (the offending indices or
values) so command-line reports can print something concrete.
"""

from __future__ import annotations

from typing import Any


class CoarseTreesError(Exception):
    def __init__(self, message: str = "", witness: Any = None, level: int | None = None):
        super().__init__(message)
        self.witness = witness
        self.level = level

    def __str__(self) -> str:
        msg = super().__str__()
        if self.level is not None:
            msg = f"level {self.level}: {msg}"
        return msg


# metric core
class MetricError(CoarseTreesError):
    pass


class AsymmetryError(MetricError):
    pass


class TriangleViolation(MetricError):
    pass


class NegativeDistance(MetricError):
    pass


class ZeroOffDiagonal(MetricError):
    pass


class DisconnectedGraph(MetricError):
    pass


class EmptySubset(CoarseTreesError):
    pass


class SpaceMismatch(CoarseTreesError):
    pass


# covers
class MissingCoordinates(CoarseTreesError):
    pass


class PreconditionViolated(CoarseTreesError):
    pass


# tower
class NonMonotoneControlFunction(CoarseTreesError):
    pass


class DiameterBudgetExceeded(CoarseTreesError):
    pass


class LebesgueWitnessMissing(CoarseTreesError):
    pass


class CoherenceViolation(CoarseTreesError):
    pass


# trees
class NotATree(CoarseTreesError):
    pass


class VertexNotInTree(CoarseTreesError):
    pass


# embedding
class PointNeverCovered(CoarseTreesError):
    pass


class AmbiguousElement(CoarseTreesError):
    pass


class ColorMismatch(CoarseTreesError):
    pass


class NestingViolation(CoarseTreesError):
    pass


# io
class FormatError(CoarseTreesError):
    pass
