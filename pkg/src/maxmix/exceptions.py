"""Exception hierarchy shared by the library and the command line."""


class MaxMixError(Exception):
    """Base class for all errors raised by :mod:`maxmix`."""

    exit_code = 5


class ParameterDomainError(MaxMixError, ValueError):
    """A model parameter or function argument lies outside its domain."""

    exit_code = 2


class UsageError(MaxMixError, ValueError):
    """Invalid combination of arguments (empty grids, missing pairs, ...)."""

    exit_code = 2


class DataError(MaxMixError, ValueError):
    """Input data are degenerate or violate a file schema."""

    exit_code = 3


class ConvergenceError(MaxMixError, RuntimeError):
    """No optimizer start converged. ``result`` holds the best point found."""

    exit_code = 4

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NumericError(MaxMixError, ArithmeticError):
    """A numerical routine produced a non-finite or unreliable value."""

    exit_code = 5

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
