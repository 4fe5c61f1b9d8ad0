"""
Error hierarchy for the DESWS pipeline.

Every error the CLI can report derives from DeswsError and carries the
process exit code it maps to. Parse errors also carry the input location
(line number or JSON field path).
"""

from __future__ import annotations

from typing import Optional


class DeswsError(Exception):
    exit_code = 1

    def __init__(self, message: str, location: Optional[str] = None):
        self.message = message
        self.location = location
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.location:
            return f"{type(self).__name__} at {self.location}: {self.message}"
        return f"{type(self).__name__}: {self.message}"


class InputError(DeswsError):
    """Bad input data or arguments (exit code 1)."""


class InvariantViolation(DeswsError):
    """An internal consistency check failed (exit code 2)."""

    exit_code = 2


# geometry
class DegenerateGeometry(InputError):
    pass


class InvalidBox(InputError):
    pass


# distance
class UnknownClass(InputError):
    pass


class ZeroPixelWidth(InputError):
    pass


class NonPositiveInput(InputError):
    pass


# warning
class EmptyGroup(InputError):
    pass


class ExactTooLarge(InputError):
    pass


class FewerThanTwoGroups(InputError):
    pass


class FewerThanTwoObservations(InputError):
    pass


# evaluation
class ZeroGroundTruth(InputError):
    pass


class EmptyDataset(InputError):
    pass


# se_block
class DimensionMismatch(InputError):
    pass


# ingestion
class MalformedLine(InputError):
    pass


class OutOfRangeField(InputError):
    pass


class UnknownClassIndex(InputError):
    pass


class SchemaError(InputError):
    pass


class DuplicateThreshold(InputError):
    pass


class MalformedRow(InputError):
    pass


class ConfigError(InputError):
    pass


# simulator
class BehindCamera(InputError):
    pass
