"""Exception types shared across the package."""


class DriftGuardError(Exception):
    """Base class for all package-specific errors."""


class ParameterDomainError(DriftGuardError, ValueError):
    """Distribution parameters outside their valid domain."""


class InputDomainError(DriftGuardError, ValueError):
    """Input value outside its documented domain."""


class InsufficientDataError(DriftGuardError, ValueError):
    """Too few samples for the requested estimate."""


class DegenerateSampleError(DriftGuardError, ValueError):
    """Sample set carries no usable variation (zero variance)."""


class ShapeError(DriftGuardError, ValueError):
    """Array shapes incompatible with the operation."""


class ConfigError(DriftGuardError, ValueError):
    """Invalid configuration value."""


class ProtocolError(DriftGuardError, RuntimeError):
    """Operation sequence violates a module contract."""


class NumericError(DriftGuardError, ArithmeticError):
    """Non-finite value produced during computation."""


class CsvParseError(DriftGuardError, ValueError):
    """Malformed header or row in an ingested CSV file."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
