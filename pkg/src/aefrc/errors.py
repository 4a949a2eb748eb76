"""Exception taxonomy shared across the package.

The CLI maps these onto distinct exit codes, so raising the right
class is part of the contract, not cosmetics.
"""


class AefrcError(Exception):
    """Base class for package errors."""


class ConfigError(AefrcError):
    """Invalid configuration. Carries every violation found, not just the first."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DataError(AefrcError):
    """Malformed or missing data: files, schemas, shape mismatches."""


class NumericalError(AefrcError):
    """Non-finite values or optimizer breakdown that cannot be recovered."""
