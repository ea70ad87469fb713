"""Exception types shared across the package."""


class RwgdError(Exception):
    pass


class AssumptionError(RwgdError):
    """A step-size / support / orthogonality guard failed.

    Carries the name of the violated condition so callers (and the CLI,
    which maps this to exit code 1) can report it.
    """


class ConfigError(RwgdError):
    """Bad configuration or I/O problem (CLI exit code 2)."""


class BudgetError(RwgdError):
    """Exhaustive enumeration would exceed the outcome budget."""


class ScheduleExhaustedError(RwgdError):
    """An explicit step-size sequence has no value for the requested iteration."""


class SvdConvergenceError(RwgdError):
    """The SVD backend failed to converge."""
