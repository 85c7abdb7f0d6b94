"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, any other
``ValueError`` (a violated precondition) -> 3, ``BudgetExceeded`` -> 4.
"""


class ConfigError(ValueError):
    """Bad or unknown configuration value."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class BudgetExceeded(RuntimeError):
    """An exact computation would exceed its evaluation budget."""


class BoundUnavailable(Exception):
    """A bound is not defined for the given data and parameters."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)
