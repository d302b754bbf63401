"""Exception types shared across the toolkit, mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Bad configuration or usage (exit code 1)."""


class DataError(ValueError):
    """Unreadable or malformed input data (exit code 2)."""


class NumericalError(RuntimeError):
    """Numerical routine failed to produce a finite result (exit code 3)."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the original cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
