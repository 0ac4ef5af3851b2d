"""Exception types shared across the package."""


class AuditError(Exception):
    """Base class for all errors raised by this package."""


class InputError(AuditError, ValueError):
    """A runtime argument violates an operation's precondition."""


class ConfigError(AuditError, ValueError):
    """A configuration object is inconsistent or incomplete."""


class StageError(AuditError, RuntimeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
