"""Exception hierarchy.

Every error raised on bad input derives from :class:`InvalidInput`; every
numerical hard failure derives from :class:`NumericalFailure`.  The CLI maps
the two families onto exit codes 2 and 3.
"""


class AndoLabError(Exception):
    pass


class InvalidInput(AndoLabError, ValueError):
    """Malformed input.  ``path`` locates the offending JSON node, if any."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path

    def __str__(self):
        msg = super().__str__()
        return f"{self.path}: {msg}" if self.path else msg


class ShapeMismatch(InvalidInput):
    pass


class NumericalFailure(AndoLabError, ArithmeticError):
    pass


class NotPSD(NumericalFailure):
    pass


class NotContraction(NumericalFailure):
    pass


class NotCommuting(NumericalFailure):
    pass


class NotIntertwining(NumericalFailure):
    pass


class NotPure(NumericalFailure):
    pass


class NotCNU(NumericalFailure):
    pass


class MarginViolation(NumericalFailure):
    def __init__(self, message, modulus=None):
        super().__init__(message)
        self.modulus = modulus


class IllConditioned(NumericalFailure):
    pass


class PadFailure(NumericalFailure):
    pass


class InternalError(NumericalFailure):
    pass
