"""Exception hierarchy shared across the package.

Every error raised on purpose by fracstim derives from :class:`FracstimError`
so callers (the CLI in particular) can tell engine failures apart from plain
bugs.  Most classes also inherit the matching builtin so existing ``except``
habits keep working.
"""

from __future__ import annotations


class FracstimError(Exception):
    """Base class for all errors raised by fracstim."""


class PoleError(FracstimError, ArithmeticError):
    """A Gamma factor was evaluated or specialized at a nonpositive integer."""


class MissingSymbol(FracstimError, KeyError):
    """A numeric assignment lacks a value for a symbol that occurs."""


class NotDivisible(FracstimError, ArithmeticError):
    """Exact division failed: the denominator is not a single monomial."""


class ZeroDivisor(FracstimError, ZeroDivisionError):
    """Exact division by the zero scalar."""


class NegativeExponent(FracstimError, ValueError):
    """An operation would push an exponent outside the nonnegative cone."""


class OrderMismatch(FracstimError, ValueError):
    """A fractional operator met an exponent shape it does not act on."""


class NegativeOmegaExponent(FracstimError, ValueError):
    """Inverse Sumudu input still contains negative transform exponents."""


class DomainError(FracstimError, ValueError):
    """Numeric evaluation outside the supported domain."""


class NonConvergence(FracstimError, ArithmeticError):
    """A numeric series failed to converge within the term budget."""


class ArityError(FracstimError, ValueError):
    """An expression refers to an unknown the problem does not have."""


class SourceError(FracstimError, ValueError):
    """A problem file failed to parse or validate.

    Carries the 1-based position and, for token-level failures, the set of
    token descriptions that would have been accepted.
    """

    def __init__(self, message: str, line: int, column: int,
                 expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(expected)

    def __str__(self) -> str:
        loc = f"{self.line}:{self.column}: {self.message}"
        if self.expected:
            loc += " (expected " + " or ".join(self.expected) + ")"
        return loc
