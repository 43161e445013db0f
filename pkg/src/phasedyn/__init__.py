"""Phase retrieval and system identification from phaseless dynamical
samples |<x, A^l phi>|^2 via the approximate Prony method.

The package splits into exponential-sum estimation (`prony`), Vandermonde
and symmetric-function helpers (`algebra`), measurement synthesis and
instance generation (`dynamics`), the recovery pipelines (`recovery`),
perturbation bounds with Monte Carlo checkers (`sensitivity`), and a
command line front end (`cli`).
"""
from . import algebra, dynamics, prony, recovery, sensitivity
from .errors import (DegenerateLeadingCoefficientError, GenerationError,
                     HypothesisError, IllConditionedError,
                     InsufficientSamplesError, PairingError, PeelingError,
                     PhasedynError, WindingError)

__version__ = "0.1.0"

__all__ = [
    "DegenerateLeadingCoefficientError",
    "GenerationError",
    "HypothesisError",
    "IllConditionedError",
    "InsufficientSamplesError",
    "PairingError",
    "PeelingError",
    "PhasedynError",
    "WindingError",
    "__version__",
    "algebra",
    "dynamics",
    "prony",
    "recovery",
    "sensitivity",
]
