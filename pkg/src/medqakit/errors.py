"""Exception types shared across the toolkit.

The CLI maps these to exit codes: ValidationError (and subclasses) -> 1,
OSError -> 2, ContractViolation -> 3.
"""


class ValidationError(ValueError):
    """Input data violates a documented contract."""


class ParseError(ValidationError):
    """A source file could not be parsed; message carries file/line context."""


class ConfigError(ValidationError):
    """Configuration cannot be resolved (unknown vocabulary, bad chain, bad path)."""


class ContractViolation(RuntimeError):
    """An internal invariant was broken; indicates a bug, not bad input."""
