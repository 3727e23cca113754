"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`SymcascadeError`,
so callers (and the CLI) can separate bad input from bugs.
"""

from __future__ import annotations

from dataclasses import dataclass


class SymcascadeError(Exception):
    """Base class for all library errors."""


class ModelError(SymcascadeError, ValueError):
    """A model, domain, distribution or assignment failed validation."""


class DistSumError(ModelError):
    pass


class ArityError(ModelError):
    pass


class UnknownVariable(ModelError):
    pass


class DuplicateName(ModelError):
    pass


class InvalidName(ModelError):
    pass


class InvalidDomain(ModelError):
    pass


class InvalidAssignment(ModelError):
    pass


@dataclass(frozen=True)
class ParseDiagnostic:
    """Where and why a constraint failed to parse.

    ``offset`` is a byte offset into the UTF-8 encoded input; it may equal the
    input length when the problem is an unexpected end of input.
    """

    offset: int
    message: str
    expected: str | None = None

    def __str__(self) -> str:
        text = f"offset {self.offset}: {self.message}"
        if self.expected:
            text += f" (expected {self.expected})"
        return text


class FormulaSyntaxError(SymcascadeError, ValueError):
    """Constraint text does not match the grammar."""

    def __init__(self, diagnostic: ParseDiagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


class FileSyntaxError(SymcascadeError, ValueError):
    """Malformed model file. ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class IntegerOverflow(SymcascadeError, ArithmeticError):
    """Term arithmetic left the signed 64-bit range."""


class ZeroPartition(SymcascadeError, ArithmeticError):
    """The constraint carries no probability mass, so the posterior is undefined."""


class SimplexViolation(SymcascadeError, ValueError):
    """A perturbation would push a distribution off the probability simplex."""


class ModelMismatch(SymcascadeError, ValueError):
    """Two models expected to differ in a single distribution differ elsewhere."""
