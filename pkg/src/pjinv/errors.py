"""Exception types shared across the toolkit."""

from __future__ import annotations


class PjinvError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PjinvError, ValueError):
    """Malformed input: wrong shape, non-finite entries, bad budget."""


class DomainError(PjinvError, ValueError):
    """Structurally valid input outside an operation's domain."""


class EvaluationError(PjinvError, RuntimeError):
    """A mapping evaluation faulted or produced a non-finite value."""

    def __init__(self, message: str, *, component: int | None = None, point=None):
        super().__init__(message)
        self.component = component
        self.point = None if point is None else tuple(float(v) for v in point)


class NotRegularError(PjinvError, RuntimeError):
    """Local inversion refused because the regularity floor is not positive."""


class NotCertifyingError(PjinvError, RuntimeError):
    """A certificate was requested from data that does not support one."""


class LocalSolveFailureError(PjinvError, RuntimeError):
    """Damped Newton could not reduce the residual any further."""


class NonConvergenceError(PjinvError, RuntimeError):
    """Iteration budget exhausted before reaching tolerance."""


class DslError(PjinvError, ValueError):
    """Base class for mapping-language errors."""


class MappingSyntaxError(DslError):
    """Syntax error with 1-based position and the expected-token set."""

    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        detail = f"syntax error at line {line}, column {column}: {message}"
        if self.expected:
            detail += "; expected " + " or ".join(self.expected)
        super().__init__(detail)


class UnknownIdentifierError(DslError):
    """An identifier is neither a declared variable nor a known function."""

    def __init__(self, name: str, line: int, column: int):
        self.name = name
        self.line = line
        self.column = column
        super().__init__(f"unknown identifier '{name}' at line {line}, column {column}")


class ArityMismatchError(DslError):
    """Component count does not match the declared variables (square mappings only)."""


class UsageError(PjinvError, ValueError):
    """Bad command-line flags; names the offending flag."""
