"""Exception hierarchy shared by every workbench module."""


class WorkbenchError(Exception):
    """Base class for all errors raised by the workbench."""


class ExpressionSyntaxError(WorkbenchError, ValueError):
    """Raised when expression text cannot be parsed.

    Carries the 1-based ``line`` and ``column`` of the offending character.
    """

    def __init__(self, message: str, line: int = 1, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ExpressionSemanticError(ExpressionSyntaxError):
    """Raised for well-formed text outside the expression class, e.g. ``exp(z1)``."""


class MetricError(WorkbenchError):
    """Raised for an invalid warping function or family selector."""


class ModelError(WorkbenchError):
    """Raised for out-of-range model orders or mismatched dimensions."""


class NoSolution(WorkbenchError):
    """Raised when a model cannot be normalized to the standard model."""


class NoMap(WorkbenchError):
    """Raised when a vector lies outside the orbit an explicit map can reach."""


class InvariantError(WorkbenchError):
    """Raised for a vanishing denominator, an inadmissible profile, or a
    computed dimension that contradicts its closed form."""


class EvaluationError(WorkbenchError):
    """Raised when a value at a point overflows the float range."""


class ScenarioError(WorkbenchError):
    """Raised for malformed scenario files."""


# Usage errors on the command line map to exit code 2.
USAGE_ERRORS = (ExpressionSyntaxError, MetricError, ModelError, ScenarioError, InvariantError, EvaluationError)
