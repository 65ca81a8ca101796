"""Exception hierarchy shared across the toolkit.

Input and modelling problems derive from :class:`InputError`; the CLI maps
those to exit code 2, anything else unexpected to exit code 3.
"""

from __future__ import annotations


class StoverifyError(Exception):
    """Base class for all toolkit errors."""


class InputError(StoverifyError):
    """A problem with user-supplied input (files, formulas, options)."""


class LtlSyntaxError(InputError, ValueError):
    """Malformed formula text. Carries the character position of the fault."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnsupportedOperatorError(InputError):
    """Formula uses an operator outside the finite-trace fragment (e.g. next)."""


class UnknownPropositionError(InputError):
    """A proposition outside the declared alphabet."""


class AlphabetTooLargeError(InputError):
    """Alphabet exceeds the configured translation cap."""


class RunTooShortError(InputError):
    """A state run with fewer than two states has no transitions to window."""


class PolySyntaxError(InputError, ValueError):
    """Malformed polynomial expression text."""


class SchemaError(InputError):
    """System document is missing fields or has malformed values."""


class DimensionMismatchError(InputError):
    """Vector/matrix sizes inconsistent with the declared dimensions."""


class UnboundedRegionError(InputError):
    """A non-complement region escapes the compact state space."""


class OverlappingRegionsError(InputError):
    """Two labelled regions share a sampled point."""


class BadRateMatrixError(InputError):
    """Transition-rate matrix rows do not sum to zero or have negative off-diagonals."""


class OutOfStateSpaceError(InputError):
    """A queried point lies outside the state-space box."""


class MissingModeError(InputError):
    """A mode id referenced but not declared."""


class MissingRatesError(InputError):
    """Operation requires a transition-rate matrix but the system has none."""


class StepTooLargeError(InputError):
    """dt too coarse for the jump rates (per-step switch probability above 0.1)."""


class DfaFormatError(InputError):
    """Malformed automaton text file."""


class OutputWriteError(StoverifyError):
    """Could not write a requested artifact (report, CSV, SMT-LIB file)."""
