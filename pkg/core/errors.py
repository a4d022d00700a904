"""Exception hierarchy. Every error knows the exit code run.py maps it to."""


class FolmiError(Exception):
    exit_code = 4


class ConfigError(FolmiError):
    """Bad user input: config values, parameters, preconditions."""
    exit_code = 3


class DimensionError(ConfigError):
    """Inconsistent shapes, non-square or asymmetric matrices."""


class ExprSyntaxError(ConfigError):

    def __init__(self, message, pos=None):
        if pos is not None:
            message = "%s (at position %d)" % (message, pos)
        super().__init__(message)
        self.pos = pos


class NumericalError(FolmiError):
    exit_code = 4


class DomainError(NumericalError):
    """Expression evaluated outside its domain (division by zero)."""
