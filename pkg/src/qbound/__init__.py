"""qbound: spectra and dynamics of Laplace-type operators whose boundary
conditions are encoded by unitary matrices on the boundary Hilbert space.

The package covers mesh construction (``geometry``), boundary unitaries and
their Cayley decomposition into implementable boundary conditions
(``boundary``), Hermitian operator assembly (``operators``), eigensolves and
spectral flow along paths of boundary conditions (``spectra``),
time-dependent Schrodinger propagation driven through the boundary
(``dynamics``), and config-driven end-to-end scenarios with a CLI
(``scenarios``, ``cli``).
"""

from . import boundary, dynamics, geometry, operators, scenarios, spectra
from .errors import (
    AssemblyError,
    ConfigError,
    DimensionMismatchError,
    ProjectionLossError,
    QboundError,
    SolverError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "geometry",
    "boundary",
    "operators",
    "spectra",
    "dynamics",
    "scenarios",
    "QboundError",
    "ConfigError",
    "DimensionMismatchError",
    "ValidationError",
    "AssemblyError",
    "SolverError",
    "ProjectionLossError",
    "__version__",
]
