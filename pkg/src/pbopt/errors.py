"""Exception types shared across the package.

The CLI maps ValidationError/ParseError/ContractViolation/DomainError to
exit code 2 and GuardError to exit code 3.
"""


class ContractViolation(ValueError):
    """An operation was called with arguments that break its contract."""


class DomainError(ValueError):
    """A numeric argument lies outside the mathematical domain."""


class ValidationError(ValueError):
    """Input data (file, config) failed validation."""


class ParseError(ValueError):
    """A file could not be parsed; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GuardError(RuntimeError):
    """A size guard refused an operation (e.g. exhaustive enumeration)."""


class DegenerateWeightsError(RuntimeError):
    """A reweighting step annihilated all particle mass."""


class InvalidParamsError(ValueError):
    """Family parameters are unusable (e.g. covariance factorization failed)."""
