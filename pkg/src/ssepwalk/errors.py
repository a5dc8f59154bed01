"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class OutOfWindowError(RuntimeError):
    """A query or a traced path left the simulated region (buffer too small)."""


class ScheduleInfeasibleError(ValueError):
    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class ResourceLimitError(RuntimeError):
    """The requested exact computation exceeds the configured size cap."""


class DomainError(LookupError):
    pass
