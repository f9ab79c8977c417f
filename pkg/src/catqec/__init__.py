"""Simulation and analysis toolkit for cat-code error correction in a superconducting resonator."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CatQecError,
    ConfigError,
    DimensionError,
    FitError,
    IntegratorError,
    LeakageError,
    NoRootError,
    TruncationError,
    UnphysicalError,
)
from .params import SystemParams, ideal_params  # noqa: E402

__all__ = [
    "__version__",
    "CatQecError",
    "ConfigError",
    "DimensionError",
    "FitError",
    "IntegratorError",
    "LeakageError",
    "NoRootError",
    "TruncationError",
    "UnphysicalError",
    "SystemParams",
    "ideal_params",
]
