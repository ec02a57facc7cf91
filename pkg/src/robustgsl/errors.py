"""Exception hierarchy shared by the library and the CLI."""


class RobustGSLError(Exception):
    """Base class for all library errors."""


class ValidationError(RobustGSLError, ValueError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """Malformed input file."""

    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class NodeRangeError(ValidationError):
    """Node id outside ``[0, n)``."""


class ShapeError(ValidationError):
    """Array dimensions are inconsistent."""


class CapacityError(ValidationError):
    """Requested perturbation exceeds the number of available node pairs."""


class NumericalError(RobustGSLError, ArithmeticError):
    """Iterative routine failed to converge or produced non-finite values."""

    def __init__(self, message, iterations=None):
        self.iterations = iterations
        super().__init__(message)


class DivergenceError(NumericalError):
    """Training objective became non-finite."""
