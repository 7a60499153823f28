"""Exception hierarchy shared across the toolkit."""


class CrabloopError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CrabloopError):
    """Run configuration is missing, malformed, or inconsistent."""


class EvaluationFailedError(CrabloopError):
    """A figure-of-merit evaluation could not be performed.

    Raised by the plant (or by field validation upstream of it) and mapped
    to a penalty value by the optimizer instead of aborting the run.
    """
