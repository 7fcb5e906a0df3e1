"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI: 2 for bad input or
configuration, 3 for numerical or solver failures.
"""


class HomLCError(Exception):
    exit_code = 1


class InputError(HomLCError, ValueError):
    exit_code = 2


class ConfigError(InputError):
    pass


class ParseError(InputError):
    """Malformed file; ``pointer`` is a JSON pointer to the offending node."""

    def __init__(self, message, pointer=""):
        self.pointer = pointer
        self.message = message
        if pointer:
            message = f"{message} (at {pointer})"
        super().__init__(message)


class InvariantError(ParseError):
    pass


class NumericError(HomLCError, ArithmeticError):
    exit_code = 3


class SolverError(NumericError):
    """Raised when an iterative solver fails; ``diagnostics`` holds its last state."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class DegenerateSampleError(NumericError):
    pass


class SingularCovarianceError(NumericError):
    pass


class DegenerateEstimateError(NumericError):
    pass


class SamplerError(NumericError):
    pass
