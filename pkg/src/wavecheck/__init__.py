"""A posteriori time-error estimation for leap-frog and cosine-type wave integrators."""

__version__ = "0.1.0"

from .errors import ConfigError, ContractViolation, ReliabilityViolation, SolverError  # noqa: E402
from .operator import (  # noqa: E402
    DiagonalOperator,
    FdLaplacian1d,
    FdLaplacian2d,
    SpectralSine,
    energy_inner,
    energy_norm,
)
from .problems import PRESETS, SineSeriesSolution, exact_state, reference_solution  # noqa: E402
from .residual import estimate  # noqa: E402
from .scheme import SchemeParams, run  # noqa: E402

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DiagonalOperator",
    "FdLaplacian1d",
    "FdLaplacian2d",
    "PRESETS",
    "ReliabilityViolation",
    "SchemeParams",
    "SineSeriesSolution",
    "SolverError",
    "SpectralSine",
    "energy_inner",
    "energy_norm",
    "estimate",
    "exact_state",
    "reference_solution",
    "run",
]
