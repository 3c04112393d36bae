"""Structured errors raised across the package.

Every error that a caller is expected to catch has its own class; plain
ValueError/TypeError are reserved for programming mistakes.
"""

from __future__ import annotations


class HyperLtlError(Exception):
    """Base class for all structured errors in this package."""


class ParseError(HyperLtlError):
    """Input text rejected; carries a source span and an expected-token set."""

    def __init__(self, message, span=None, expected=()):
        super().__init__(message)
        self.span = span
        self.expected = tuple(expected)

    def __str__(self):
        base = super().__str__()
        if self.span is not None:
            base = f"{self.span}: {base}"
        if self.expected:
            base += " (expected: " + ", ".join(sorted(self.expected)) + ")"
        return base


class EmptyLoop(HyperLtlError):
    """A lasso trace was given an empty loop part."""


class DanglingEdge(HyperLtlError):
    """A structure edge touches an undeclared state, or a state has no successor."""


class NoInitialState(HyperLtlError):
    """A structure was declared without any initial state."""


class EmptyWordPair(HyperLtlError):
    """A word pair with an empty side; correspondence instances need nonempty words."""


class UnknownOpcode(HyperLtlError):
    """A counter-machine rule names an operation other than inc/dec/zero."""


class QuantifierUnderTemporal(HyperLtlError):
    """A trace quantifier occurs inside a temporal operator; prenexing is undefined."""


class CaptureError(HyperLtlError):
    """A variable substitution would capture a free occurrence."""


class PeriodBlowup(HyperLtlError):
    """Aligning the given lassos needs a common period beyond the configured cap."""


class SizeBlowup(HyperLtlError):
    """A formula construction exceeded the configured node cap."""


class ShapeError(HyperLtlError):
    """The sentence's quantifier prefix does not match the operation's shape."""


class ComplementBlowup(HyperLtlError):
    """Automaton complementation refused: input or output beyond the configured cap."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context


class NotAModel(HyperLtlError):
    """A trace set that was required to satisfy a sentence does not."""


class NotASolution(HyperLtlError):
    """An index word that fails the correspondence check h(s) = h'(s)."""


class NotTotallyOrdered(HyperLtlError):
    """Counter value sets of a model are not totally ordered by inclusion."""


class BudgetExceeded(HyperLtlError):
    """An enumeration or search exceeded its configured budget."""
