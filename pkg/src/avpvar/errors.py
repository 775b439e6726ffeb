"""Exception types shared across the package."""


class AvpVarError(Exception):
    """Base class for package errors."""


class DomainError(AvpVarError, ValueError):
    """Invalid value or shape in user-supplied inputs (names the offending item)."""


class InsufficientDataError(AvpVarError, ValueError):
    """Not enough observations for the requested transformation or design."""


class ConfigError(AvpVarError, ValueError):
    """Invalid run configuration (unknown keys, missing files, bad model names)."""


class NumericalError(AvpVarError, RuntimeError):
    """A linear-algebra step failed beyond the allowed jitter ladder."""
