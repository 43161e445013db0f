"""Dense complex-vector utilities for exponential-sum recovery.

Discrete Fourier transform, rectangular Vandermonde matrices and their
explicit inverses, elementary symmetric polynomials, and the three
conditioning functionals (base radius, product radius, minimal separation)
that drive all perturbation bounds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError

# Two bases closer than this (times max(1, rho)) count as coincident.
COINCIDENCE_TOL = 1e-10


def as_complex_vector(v, name: str = "v") -> np.ndarray:
    """Validate and convert to a 1-d complex array with finite entries."""
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def dft(v) -> np.ndarray:
    """Discrete Fourier transform with kernel F = (e^{-2 pi i jk/d}).

    idft inverts it to 1e-12 relative accuracy.
    """
    arr = as_complex_vector(v)
    return np.fft.fft(arr)


def idft(v) -> np.ndarray:
    """Inverse of dft, i.e. multiplication by F^{-1} = conj(F)/d."""
    arr = as_complex_vector(v)
    return np.fft.ifft(arr)


def build_vandermonde(beta, L: int) -> np.ndarray:
    """Rectangular Vandermonde matrix with entry (l, k) = beta_k^l.

    Shape (L, K) for K bases; rows are the powers l = 0..L-1.
    """
    b = as_complex_vector(beta, "beta")
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    return b[np.newaxis, :] ** np.arange(L)[:, np.newaxis]


def elementary_symmetric(beta, skip: int | None = None) -> np.ndarray:
    """All elementary symmetric polynomials S_0..S_M of the included bases.

    With skip=l the l-th base is excluded (M = K-1 values plus S_0 = 1).
    Computed by multiplying out prod(z + beta_k) one factor at a time.
    """
    b = as_complex_vector(beta, "beta")
    if skip is not None:
        if not 0 <= skip < b.size:
            raise ValueError(f"skip index {skip} out of range for {b.size} bases")
        b = np.delete(b, skip)
    coeffs = np.zeros(b.size + 1, dtype=complex)
    coeffs[0] = 1.0
    for t, bk in enumerate(b, start=1):
        coeffs[1:t + 1] = coeffs[1:t + 1] + bk * coeffs[:t]
    return coeffs


@dataclass(frozen=True, eq=False)
class ConditioningProfile:
    """The conditioning functionals of a base vector.

    rho   max(1, max |beta_k|)      base radius
    pi    prod (1 + |beta_k|)       product radius
    sigma min_{j != k} |beta_j - beta_k|  minimal separation (inf for K = 1)

    size (K) and beta_abs are carried along because the perturbation bounds
    need sigma^{K-1} powers and shifted radii over the base moduli.
    """

    rho: float
    pi: float
    sigma: float
    size: int
    beta_abs: np.ndarray

    def separation_power(self) -> float:
        """sigma^{K-1}, with the K = 1 empty product defined as 1."""
        if self.size == 1:
            return 1.0
        return float(self.sigma) ** (self.size - 1)

    def rho_shifted(self, delta: float) -> float:
        """Base radius after shifting every modulus up by delta."""
        return max(1.0, float(np.max(self.beta_abs)) + delta)

    def pi_shifted(self, delta: float) -> float:
        """Product radius after shifting every modulus up by delta."""
        return float(np.prod(1.0 + self.beta_abs + delta))


def conditioning_profile(beta) -> ConditioningProfile:
    """Compute rho, pi and sigma for a base vector."""
    b = as_complex_vector(beta, "beta")
    mods = np.abs(b)
    rho = max(1.0, float(mods.max()))
    pi = float(np.prod(1.0 + mods))
    if b.size == 1:
        sigma = np.inf
    else:
        diff = np.abs(b[:, np.newaxis] - b[np.newaxis, :])
        np.fill_diagonal(diff, np.inf)
        sigma = float(diff.min())
    return ConditioningProfile(rho=rho, pi=pi, sigma=sigma, size=b.size,
                               beta_abs=mods)


def _check_separated(profile: ConditioningProfile, context: str) -> None:
    if profile.size > 1 and profile.sigma < COINCIDENCE_TOL * profile.rho:
        raise IllConditionedError(
            f"{context}: coincident bases (separation {profile.sigma:.3e})")


def invert_square_vandermonde(beta) -> np.ndarray:
    """Closed-form inverse of the square Vandermonde matrix.

    Entry (l, k) = (-1)^{K-k-1} S^{(l)}_{K-k-1}(beta) / prod_{j != l}(beta_l - beta_j),
    so row l is the coefficient vector of the l-th Lagrange polynomial.
    """
    b = as_complex_vector(beta, "beta")
    K = b.size
    profile = conditioning_profile(b)
    _check_separated(profile, "invert_square_vandermonde")
    inv = np.empty((K, K), dtype=complex)
    signs = (-1.0) ** (K - np.arange(K) - 1)
    for ell in range(K):
        sym = elementary_symmetric(b, skip=ell)          # S_0..S_{K-1}
        denom = np.prod(b[ell] - np.delete(b, ell)) if K > 1 else 1.0
        inv[ell, :] = signs * sym[K - np.arange(K) - 1] / denom
    return inv


def vandermonde_condition_bound(beta, L: int) -> float:
    """Upper bound sqrt(K) L pi rho^{L-1} / sigma^{K-1} for cond_2 of V_L."""
    b = as_complex_vector(beta, "beta")
    K = b.size
    if L < K:
        raise ValueError(f"L must be >= K, got L={L}, K={K}")
    profile = conditioning_profile(b)
    _check_separated(profile, "vandermonde_condition_bound")
    return (np.sqrt(K) * L * profile.pi * profile.rho ** (L - 1)
            / profile.separation_power())
