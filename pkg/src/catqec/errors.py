"""Exception types raised across the package."""

from __future__ import annotations


class CatQecError(Exception):
    """Base class for all package errors."""


class TruncationError(CatQecError):
    """Population reached the top of the truncated Fock space."""


class DimensionError(CatQecError):
    """Operands live in spaces of different dimension."""


class LeakageError(CatQecError):
    """Decoded state left the code space by more than the allowed bound."""


class IntegratorError(CatQecError):
    """Master-equation integration drifted beyond tolerance."""


class NoRootError(CatQecError):
    """A bracketed root search found no sign change."""


class UnphysicalError(CatQecError):
    """Reconstructed process matrix is not positive semidefinite."""


class FitError(CatQecError):
    """Least-squares fit failed to converge."""


class ConfigError(CatQecError):
    """Invalid configuration key or value."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
