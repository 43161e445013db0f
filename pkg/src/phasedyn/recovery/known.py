"""Recovery pipelines with one side of the problem known.

Either the system is known and the signal is recovered through a linear
solve over the known product bases, or the signal is known and the spectrum
is recovered by assigning Prony output to the known coefficient products.
"""
from __future__ import annotations

import warnings

import numpy as np

from ..algebra import as_complex_vector, build_vandermonde, idft
from ..dynamics import (CirculantSystem, _spectrum_of, is_collision_free,
                        transform_coefficients)
from ..errors import (HypothesisError, IllConditionedError,
                      InsufficientSamplesError)
from ..prony import KERNEL_GAP_THRESHOLD, UnreliableKernelWarning, approximate_prony
from .products import MATCH_CAP, ProductTable, RecoveryResult, \
    factor_rank_one_products, match_values

# A sampling vector with |psi_k| below this (relative) blocks eigenspace k.
BLOCKED_TOL = 1e-8


def _psi_of(system, phi):
    pv = as_complex_vector(phi, "phi")
    if isinstance(system, CirculantSystem):
        from ..algebra import dft
        return dft(pv) / system.dimension
    return np.linalg.solve(system.S, pv)


def recover_signal_known_system(system, phi, samples) -> RecoveryResult:
    """Recover x from |<x, A^l phi>|^2 when A (hence the spectrum) is known.

    Solves the least-squares system over the known bases lam_j conj(lam_k)
    for the coefficient products, factors them, and maps back through the
    eigenbasis. The result carries a global-phase gauge.
    """
    lam = _spectrum_of(system)
    d = lam.size
    h = np.asarray(samples, dtype=float)
    if h.ndim != 1:
        raise ValueError("samples must be a one-dimensional real sequence")
    if h.size < d * d:
        raise InsufficientSamplesError(
            f"need at least d^2 = {d * d} samples, got {h.size}")
    if not is_collision_free(lam):
        raise HypothesisError("spectrum is not collision-free")
    psi = _psi_of(system, phi)
    psi_scale = float(np.abs(psi).max())
    blocked = np.nonzero(np.abs(psi) < BLOCKED_TOL * psi_scale)[0]
    if blocked.size:
        raise HypothesisError(
            f"sampling vector blocks eigenspaces {blocked.tolist()}")
    bases = np.outer(lam, np.conj(lam)).ravel()
    V = build_vandermonde(bases, h.size)
    eta, _, rank, svals = np.linalg.lstsq(V, h.astype(complex), rcond=None)
    if rank < bases.size:
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
        raise IllConditionedError("known-bases Vandermonde is rank deficient",
                                  condition=cond)
    residual = float(np.linalg.norm(V @ eta - h))
    tau = {(j, k): j * d + k for j in range(d) for k in range(d)}
    table = ProductTable(bases=bases, coeffs=eta, tau=tau, winding="asRecovered")
    y = factor_rank_one_products(table, psi)
    if isinstance(system, CirculantSystem):
        x = idft(y)  # (S^*)^{-1} = F^{-1}
    else:
        x = np.linalg.solve(system.S.conj().T, y)
    anchor = int(np.argmax([np.real(eta[tau[(j, j)]]) for j in range(d)]))
    return RecoveryResult(
        signal=x,
        gauge={"anchor": anchor, "convention": "largest |c| real positive",
               "winding": "asRecovered"},
        diagnostics={"residual": residual,
                     "condition": float(svals[0] / svals[-1])},
        table=table)


def recover_spectrum_known_signal(S, x, phi, samples) -> RecoveryResult:
    """Recover the spectrum when the eigenbasis S and the signal x are known.

    Runs the approximate Prony method with K = d^2, assigns recovered
    coefficients to the known products c_j conj(c_k) by optimal matching,
    and reads magnitudes and relative phases off the inherited indices.
    The largest-magnitude eigenvalue is gauged real-positive.
    """
    S = np.asarray(S, dtype=complex)
    xv = as_complex_vector(x, "x")
    d = xv.size
    if S.shape != (d, d):
        raise ValueError(f"S must be {d}x{d}, got {S.shape}")
    h = np.asarray(samples, dtype=float)
    K = d * d
    if h.size <= 2 * K:
        raise InsufficientSamplesError(
            f"need more than 2 d^2 = {2 * K} samples, got {h.size}")
    y = S.conj().T @ xv
    psi = np.linalg.solve(S, as_complex_vector(phi, "phi"))
    c = np.conj(y) * psi
    c_scale = float(np.abs(c).max())
    if np.any(np.abs(c) < BLOCKED_TOL * c_scale):
        raise HypothesisError("a coefficient c_k vanishes")
    known_products = np.outer(c, np.conj(c)).ravel()
    gaps = np.abs(known_products[:, np.newaxis] - known_products[np.newaxis, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() < 1e-8 * np.abs(known_products).max():
        raise HypothesisError("coefficient products are not collision-free")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnreliableKernelWarning)
        result = approximate_prony(h, K)
    if result.kernel_gap < KERNEL_GAP_THRESHOLD:
        raise IllConditionedError(
            "Prony kernel unreliable: singular-value gap "
            f"{result.kernel_gap:.3f} < {KERNEL_GAP_THRESHOLD}")
    perm = match_values(result.sum.eta, known_products, cap_rel=MATCH_CAP)
    tau = {(j, k): int(perm[j * d + k]) for j in range(d) for k in range(d)}
    table = ProductTable(bases=result.sum.beta, coeffs=result.sum.eta,
                         tau=tau, winding="asRecovered")
    diag = np.array([result.sum.beta[tau[(j, j)]] for j in range(d)])
    mags = np.sqrt(np.clip(np.real(diag), 0.0, None))
    anchor = int(np.argmax(mags))
    args = np.array([np.angle(result.sum.beta[tau[(j, anchor)]])
                     if j != anchor else 0.0 for j in range(d)])
    spectrum = mags * np.exp(1j * args)
    match_dist = float(np.abs(result.sum.eta[perm] - known_products).max())
    return RecoveryResult(
        spectrum=spectrum,
        gauge={"anchor": anchor,
               "convention": "largest |lambda| real positive"},
        diagnostics={"sigma_min": result.sigma_min,
                     "kernel_gap": result.kernel_gap,
                     "residual": result.residual,
                     "match_distance": match_dist},
        table=table)
