"""Exception types shared across the package."""


class VixError(Exception):
    """Base class for all package errors."""


class DimensionError(VixError, ValueError):
    """Operand shapes are incompatible with an operation."""


class ContractError(VixError, ValueError):
    """A call violated an operation's preconditions (e.g. backward on a non-scalar)."""


class ConfigError(VixError, ValueError):
    """A configuration is invalid or internally inconsistent."""


class NonFiniteError(VixError, FloatingPointError):
    """An operation produced NaN or Inf while anomaly detection was on."""

    def __init__(self, op: str, message: str | None = None):
        self.op = op
        super().__init__(message or f"non-finite output produced by op '{op}'")


class IngestionError(VixError, OSError):
    """A dataset file is missing or malformed."""


class CheckpointError(VixError, ValueError):
    """A checkpoint file is truncated, corrupt, or belongs to a different config."""
