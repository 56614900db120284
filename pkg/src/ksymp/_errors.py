"""Exception classes for ksymp."""

from __future__ import annotations


class KSympError(Exception):
    """Base exception for all ksymp errors."""

    pass


# === Expressions ===


class ExpressionError(KSympError):
    """Base class for expression parsing problems."""

    pass


class ExpressionSyntaxError(ExpressionError):
    """Text is not in the expression grammar."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class UnknownFunctionError(ExpressionSyntaxError):
    """A function call names something outside the supported unary operations."""

    def __init__(self, name: str, offset: int | None = None) -> None:
        super().__init__(f"unknown function {name!r}", offset)
        self.name = name


# === Evaluation ===


class EvaluationError(KSympError):
    """Base class for numeric evaluation failures."""

    pass


class UnboundVariableError(EvaluationError):
    """An expression references a variable with no binding."""

    def __init__(self, name: str) -> None:
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class EvaluationDomainError(EvaluationError):
    """Division by zero, log of a non-positive value, or a similar domain violation."""

    pass


# === Models ===


class ModelError(KSympError):
    """A field model is malformed."""

    pass


class DimensionMismatchError(ModelError):
    """A point, field or form does not match the dimensions of its model or space."""

    pass


class ModelFileError(ModelError):
    """A model file failed to decode or validate."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None) -> None:
        where = source or "<model>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.source = source


class ValidationError(KSympError):
    """Invalid option or command-line value."""

    pass


# === Field equations ===


class MissingDerivativeError(KSympError):
    """A section lacks the derivative data a residual needs."""

    pass


class NonConvergenceError(KSympError):
    """An iterative solver did not reach its tolerance."""

    def __init__(
        self, message: str, iterations: int | None = None, residual: float | None = None
    ) -> None:
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class SingularHessianError(NonConvergenceError):
    """Newton iteration met a singular Lagrangian Hessian."""

    pass


class ConstraintViolationError(KSympError):
    """A point does not lie on the constraint set it was declared on."""

    pass


class NotSopdeError(KSympError):
    """A k-vector field fails the second-order condition where one is required."""

    pass


class NotTangentError(KSympError):
    """A unified k-vector field is not tangent to the graph of the Legendre map."""

    pass


class WrongPathwayError(KSympError):
    """A report was requested on a model of the wrong regularity class."""

    pass
