"""Recovery pipelines: known-system, known-signal, unordered, low-pass,
and multi-vector phase retrieval."""
from .known import recover_signal_known_system, recover_spectrum_known_signal
from .lowpass import (lowpass_order, peel_lowpass_spectrum,
                      peel_lowpass_spectrum_exhaustive, recover_lowpass_complex,
                      recover_lowpass_real)
from .multivector import recover_multi_vector
from .products import (InconsistentTableError, ProductTable, RecoveryResult,
                       align_global_phase, factor_rank_one_products,
                       match_values, result_to_json)
from .unordered import recover_unordered_spectrum

__all__ = [
    "InconsistentTableError",
    "ProductTable",
    "RecoveryResult",
    "align_global_phase",
    "factor_rank_one_products",
    "lowpass_order",
    "match_values",
    "peel_lowpass_spectrum",
    "peel_lowpass_spectrum_exhaustive",
    "recover_lowpass_complex",
    "recover_lowpass_real",
    "recover_multi_vector",
    "recover_signal_known_system",
    "recover_spectrum_known_signal",
    "recover_unordered_spectrum",
    "result_to_json",
]
