"""Exception hierarchy; each family maps to a CLI exit code."""

from __future__ import annotations


class FusionError(Exception):
    """Base class for all errors raised by losfusion."""

    exit_code = 2


class ConfigError(FusionError):
    """Invalid run configuration or scenario description."""

    exit_code = 1


class DataError(FusionError, ValueError):
    """Malformed or physically invalid input data."""

    exit_code = 2


class GeometryError(DataError):
    """Viewing-geometry angles outside their valid domain."""


class NumericalError(FusionError, ArithmeticError):
    """A linear system was singular or numerically unusable."""

    exit_code = 3
