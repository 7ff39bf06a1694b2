"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class PrecipGenError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(PrecipGenError):
    category = "config"
    exit_code = 2


class DomainError(ConfigError, ValueError):
    """Parameter outside the mathematical domain of a function."""

    category = "domain"


class DataError(PrecipGenError):
    category = "data"
    exit_code = 3


class NumericalError(PrecipGenError):
    category = "numerical"
    exit_code = 4


class FittingError(NumericalError):
    category = "fitting"

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
