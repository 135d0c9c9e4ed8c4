"""Exception hierarchy.

Each family maps onto one CLI exit code (see :mod:`manovaboot.cli`).
"""

from __future__ import annotations


class ManovaError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class SpecError(ManovaError, ValueError):
    """Invalid layout, hypothesis, or configuration."""

    exit_code = 2


class DataError(ManovaError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 3


class InsufficientDataError(DataError):
    """A cell has fewer than two observations."""


class NumericalError(ManovaError, ArithmeticError):
    """A numerical kernel failed (non-convergence, asymmetric input, ...)."""

    exit_code = 4


class DimensionError(NumericalError, ValueError):
    """Invalid or oversized matrix dimensions."""


class ShapeError(NumericalError, ValueError):
    """Operand shapes are incompatible or a matrix is not symmetric."""
