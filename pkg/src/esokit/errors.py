"""Exception types shared across the package."""

from __future__ import annotations


class EsoKitError(Exception):
    """Base class for all esokit errors."""


class ValidationError(EsoKitError):
    """An input object violates one of its invariants.

    ``field`` names the offending field so callers can report it precisely.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class CapacityError(EsoKitError):
    """Exact enumeration would exceed the configured caps.

    Callers should fall back to the Monte-Carlo path.
    """


class UnsupportedMethodError(EsoKitError):
    """The requested method/formula does not apply to the given inputs."""


class CertificateUnavailableError(EsoKitError):
    """A PSD certificate was requested but only a statistical estimate of the
    probability matrix exists; use the Monte-Carlo verifier instead."""


class DivergenceError(EsoKitError):
    """The solver's objective gap grew persistently, signalling invalid
    stepsize parameters."""


class ParseError(EsoKitError):
    """A text input could not be parsed; carries the offending location."""

    def __init__(self, message: str, line: int | None = None):
        loc = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
