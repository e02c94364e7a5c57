"""Exception types shared across the package."""


class QboundError(Exception):
    """Base class for package-specific failures."""


class ConfigError(QboundError, ValueError):
    """Invalid configuration or domain description; message names the offending field."""


class DimensionMismatchError(QboundError, ValueError):
    """Operands with incompatible shapes or boundary dimensions."""


class ValidationError(QboundError, ValueError):
    """An object violates one of its documented invariants."""


class AssemblyError(QboundError, RuntimeError):
    """Operator assembly failed (rank-deficient constraints, bad mesh/BC pairing)."""


class SolverError(QboundError, RuntimeError):
    """Eigenvalue or linear solve did not converge; message carries diagnostics."""


class ProjectionLossError(QboundError, RuntimeError):
    """Per-step projection loss exceeded tolerance during frozen-domain stepping."""
