"""Approximate Prony method for exponential sums.

Recovers the coefficients and bases of h_l = sum_k eta_k beta_k^l from
equispaced samples: Hankel assembly, SVD kernel extraction, companion-matrix
root finding, and a Vandermonde least-squares fit for the coefficients.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .algebra import (COINCIDENCE_TOL, as_complex_vector, build_vandermonde,
                      conditioning_profile)
from .errors import (DegenerateLeadingCoefficientError, IllConditionedError,
                     InsufficientSamplesError)

# Relative threshold below which the leading polynomial coefficient counts
# as vanished.
LEADING_COEFF_TOL = 1e-12

# sigma_{K-1}/sigma_K below this means the kernel direction is unreliable.
KERNEL_GAP_THRESHOLD = 2.0


class UnreliableKernelWarning(UserWarning):
    """Smallest two singular values were too close to isolate the kernel."""


@dataclass
class ExponentialSum:
    """A finite exponential sum: h_l = sum_k eta_k beta_k^l.

    Coefficients must be nonzero and bases nonzero and pairwise distinct.
    """

    eta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.eta = as_complex_vector(self.eta, "eta")
        self.beta = as_complex_vector(self.beta, "beta")
        if self.eta.size != self.beta.size:
            raise ValueError(
                f"eta and beta lengths differ: {self.eta.size} vs {self.beta.size}")
        if np.any(np.abs(self.eta) == 0.0):
            raise ValueError("all coefficients eta_k must be nonzero")
        if np.any(np.abs(self.beta) == 0.0):
            raise ValueError("all bases beta_k must be nonzero")
        profile = conditioning_profile(self.beta)
        if profile.size > 1 and profile.sigma < COINCIDENCE_TOL * profile.rho:
            raise ValueError(
                f"bases are not pairwise distinct (separation {profile.sigma:.3e})")

    @property
    def order(self) -> int:
        return self.beta.size


@dataclass
class HankelMatrix:
    """Rectangular Hankel matrix of samples, entry (l, k) = h_{l+k}."""

    entries: np.ndarray
    order: int        # K
    num_samples: int  # L

    @property
    def shape(self):
        return self.entries.shape


@dataclass
class PronyResult:
    """Output of the approximate Prony method.

    sigma_min  smallest singular value of the sample Hankel matrix
    residual   two-norm of V_L(beta) eta - h for the fitted sum
    kernel_gap sigma_{K-1}/sigma_K of the sample Hankel (inf if sigma_K = 0);
               below 2 the extracted kernel direction is unreliable
    """

    sum: ExponentialSum
    sigma_min: float
    residual: float
    kernel_gap: float

    def __post_init__(self):
        if self.sigma_min < 0 or self.residual < 0:
            raise ValueError("sigma_min and residual must be nonnegative")


def evaluate(sum: ExponentialSum, L: int) -> np.ndarray:
    """Samples h_l = sum_k eta_k beta_k^l for l = 0..L-1."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    return build_vandermonde(sum.beta, L) @ sum.eta


def build_hankel(h, K: int) -> HankelMatrix:
    """Hankel matrix of shape (L-K) x (K+1) from L > 2K samples."""
    arr = as_complex_vector(h, "h")
    L = arr.size
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if L <= 2 * K:
        raise InsufficientSamplesError(
            f"need more than 2K = {2 * K} samples for K = {K}, got {L}")
    entries = scipy.linalg.hankel(arr[:L - K], arr[L - K - 1:])
    return HankelMatrix(entries=entries, order=K, num_samples=L)


def _hankel_entries(H) -> np.ndarray:
    if isinstance(H, HankelMatrix):
        return H.entries
    return np.asarray(H, dtype=complex)


def _kernel_svd(H) -> tuple[np.ndarray, np.ndarray]:
    """Right singular vector of the smallest singular value, plus all
    singular values in descending order."""
    entries = _hankel_entries(H)
    try:
        _, svals, vh = np.linalg.svd(entries)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise IllConditionedError(f"SVD failed on Hankel matrix: {exc}")
    gamma = np.conj(vh[-1])
    return gamma, svals


def kernel_vector(H) -> tuple[np.ndarray, float]:
    """Unit-norm kernel estimate gamma and the smallest singular value.

    For exact samples of a K-term sum, H gamma = 0 up to sigma scale and
    gamma spans the one-dimensional kernel.
    """
    gamma, svals = _kernel_svd(H)
    return gamma, float(svals[-1])


def polynomial_roots(gamma) -> np.ndarray:
    """All K roots of P(z) = sum_k gamma_k z^k via the companion matrix.

    Deterministic output order: descending modulus, ties by ascending phase.
    """
    g = as_complex_vector(gamma, "gamma")
    if g.size < 2:
        raise ValueError("gamma must have degree >= 1 (length >= 2)")
    scale = np.abs(g).max()
    if np.abs(g[-1]) < LEADING_COEFF_TOL * scale:
        raise DegenerateLeadingCoefficientError(
            f"leading coefficient {np.abs(g[-1]):.3e} below "
            f"{LEADING_COEFF_TOL:.0e} * {scale:.3e}")
    roots = np.roots(g[::-1])
    order = np.lexsort((np.angle(roots), -np.abs(roots)))
    return roots[order]


def fit_coefficients(beta, h) -> tuple[np.ndarray, float]:
    """Least-squares coefficients minimizing ||V_L(beta) eta - h||_2.

    Solved through the SVD (numpy lstsq), never the normal equations.
    """
    b = as_complex_vector(beta, "beta")
    arr = as_complex_vector(h, "h")
    K, L = b.size, arr.size
    if L < K:
        raise InsufficientSamplesError(f"need at least K = {K} samples, got {L}")
    profile = conditioning_profile(b)
    if profile.size > 1 and profile.sigma < COINCIDENCE_TOL * profile.rho:
        raise IllConditionedError(
            f"near-coincident bases (separation {profile.sigma:.3e})")
    V = build_vandermonde(b, L)
    eta, _, rank, svals = np.linalg.lstsq(V, arr, rcond=None)
    if rank < K:
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
        raise IllConditionedError("rank-deficient Vandermonde system",
                                  condition=cond)
    residual = float(np.linalg.norm(V @ eta - arr))
    return eta, residual


def approximate_prony(h, K: int) -> PronyResult:
    """Estimate a K-term exponential sum from L > 2K equispaced samples.

    Composes build_hankel, kernel_vector, polynomial_roots and
    fit_coefficients; bases come out in the canonical order of
    polynomial_roots with coefficients aligned.
    """
    arr = as_complex_vector(h, "h")
    H = build_hankel(arr, K)
    gamma, svals = _kernel_svd(H)
    sigma_min = float(svals[-1])
    if sigma_min > 0:
        kernel_gap = float(svals[-2] / svals[-1])
    else:
        kernel_gap = np.inf
    if kernel_gap < KERNEL_GAP_THRESHOLD:
        warnings.warn(
            f"kernel direction unreliable: sigma_K = {sigma_min:.3e} exceeds "
            f"half of sigma_(K-1) = {svals[-2]:.3e}", UnreliableKernelWarning)
    roots = polynomial_roots(gamma)
    eta, residual = fit_coefficients(roots, arr)
    result_sum = ExponentialSum(eta=eta, beta=roots)
    return PronyResult(sum=result_sum, sigma_min=sigma_min, residual=residual,
                       kernel_gap=kernel_gap)
