"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An operand lies outside the mathematical domain of an operation."""


class EvaluationError(ArithmeticError):
    """An operation failed while evaluating a program.

    ``lane`` is one of ``"original"``, ``"perturbed"``, ``"plain"`` or
    ``"oracle"``; ``op_index`` is the dynamic ordinal of the failing operation.
    """

    def __init__(self, message, *, lane=None, op_index=None, span=None):
        super().__init__(message)
        self.message = message
        self.lane = lane
        self.op_index = op_index
        self.span = span

    def __str__(self):
        where = []
        if self.lane is not None:
            where.append(f"lane={self.lane}")
        if self.op_index is not None:
            where.append(f"op #{self.op_index}")
        if self.span is not None:
            where.append(f"line {self.span[0]}, col {self.span[1]}")
        return self.message + (f" ({', '.join(where)})" if where else "")


class NonFiniteError(EvaluationError):
    """An intermediate overflowed to inf/nan; evaluation is aborted and flagged."""


class ParseError(ValueError):
    def __init__(self, message, line, column):
        self.line = line
        self.column = column
        self.message = message
        super().__init__(f"{message} at line {line}, column {column}")


class BindingError(ValueError):
    """Bindings do not match a program's parameters."""


class SingularMatrixError(ArithmeticError):
    pass


class UndefinedCorrelationError(ValueError):
    """Correlation requested for a series with zero variance."""
