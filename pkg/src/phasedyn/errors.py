"""Exception types shared across the package.

Every failure that a caller can reasonably branch on gets its own class;
all of them derive from ValueError so casual callers can catch broadly.
"""
from __future__ import annotations


class PhasedynError(ValueError):
    """Base class for all package-specific errors."""


class InsufficientSamplesError(PhasedynError):
    """Fewer samples than the operation's minimum."""


class DegenerateLeadingCoefficientError(PhasedynError):
    """Polynomial leading coefficient vanished; the degree collapsed."""


class IllConditionedError(PhasedynError):
    """A linear system was too close to singular to trust.

    Carries the estimated condition number when one is available.
    """

    def __init__(self, message: str, condition: float | None = None):
        if condition is not None:
            message = f"{message} (estimated condition number {condition:.3e})"
        super().__init__(message)
        self.condition = condition


class HypothesisError(PhasedynError):
    """A theorem hypothesis (collision-freedom, nonvanishing, ...) failed."""


class PairingError(PhasedynError):
    """Assignment of recovered quantities to known targets failed."""


class PeelingError(PhasedynError):
    """Greedy kernel peeling could not consume the recovered bases."""


class WindingError(PhasedynError):
    """The winding direction could not be resolved unambiguously."""


class GenerationError(PhasedynError):
    """Random-instance generation exhausted its rejection budget."""
