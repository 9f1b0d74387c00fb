"""Exception hierarchy.

Numerical failures derive from :class:`NumericsError` so the CLI can map
them to a single exit code.
"""


class LatchVdPError(Exception):
    """Base class for all package errors."""


class ParameterError(LatchVdPError, ValueError):
    pass


class ConfigError(LatchVdPError, ValueError):
    pass


class NumericsError(LatchVdPError, ArithmeticError):
    pass


class NoSolution(NumericsError):
    pass


class StepSizeUnderflow(NumericsError):
    pass


class Blowup(NumericsError):
    pass


class TooShort(NumericsError):
    pass


class NewtonDivergence(NumericsError):
    pass


class StepUnderflow(NumericsError):
    """Continuation step size dropped below its lower bound."""


class MeshAdaptationFailure(NumericsError):
    pass


class NotASaddle(NumericsError):
    pass
