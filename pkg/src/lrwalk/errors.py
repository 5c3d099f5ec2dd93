"""Exception types shared by the library and mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid configuration value.  ``field`` names the offending input."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalError(RuntimeError):
    """An eigensolver or linear-algebra step failed."""


class NoConvergenceError(RuntimeError):
    """The reset protocol never reaches the target detection probability."""


class NotReachedError(RuntimeError):
    """A trace ends before the requested threshold is crossed."""
