"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FloraError(Exception):
    """Base class for all domain errors raised by flora."""


class ParseError(FloraError):
    """Input could not be parsed (bad CSV/JSON, wrong header, non-numeric field)."""


class ValidationError(FloraError):
    """Input parsed but violates a domain invariant."""


class SelectionError(FloraError):
    """A selection policy could not produce a configuration."""
