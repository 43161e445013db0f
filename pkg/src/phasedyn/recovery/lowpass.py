"""Recovery for circulant systems with a low-pass kernel.

The spectrum is real, positive, even and strictly decreasing, so the
measurement collapses onto products a_hat_j a_hat_k over 0 <= k <= j <= m.
Two extraction routes are implemented for the real case and scored by
their sample-domain residual:

* product peeling: one Prony run of order (m+1)(m+2)/2 over the product
  bases shared by all sampling vectors, followed by greedy peeling;
* square root: each real sample sequence is a perfect square of an
  (m+1)-term sum in a_hat itself, so restoring the sign of +-sqrt(h)
  reduces the Prony order from quadratic to linear in m. This route
  survives clustered products whose order-K Hankel is numerically
  rank-deficient. Sign patterns are enumerated around local minima of
  h and scored by Hankel rank deficiency.

Per-frequency real linear systems then recover the signal from two (real
case) or four (complex case) sampling vectors.
"""
from __future__ import annotations

import itertools
import math
import warnings

import numpy as np
from scipy.optimize import least_squares

from ..algebra import build_vandermonde, dft, idft
from ..dynamics import lowpass_multiplicities, lowpass_pairs
from ..errors import (HypothesisError, IllConditionedError,
                      InsufficientSamplesError, PairingError, PeelingError)
from ..prony import (KERNEL_GAP_THRESHOLD, UnreliableKernelWarning,
                     build_hankel, polynomial_roots)
from .products import RecoveryResult, match_values

# Peeled values further than this (relative) from the nearest live base fail.
PEEL_CAP = 1e-3

# Condition-number ceiling for the per-frequency linear systems.
FREQUENCY_COND_MAX = 1e8

# Relative model residual above which an extraction route is distrusted.
RESIDUAL_TOL = 1e-4


def lowpass_order(d: int) -> int:
    """Number of grouped exponential terms, (m+1)(m+2)/2 with m = floor(d/2)."""
    m = d // 2
    return (m + 1) * (m + 2) // 2


def peel_lowpass_spectrum(bases, d: int, *, cap_rel: float = PEEL_CAP) -> np.ndarray:
    """Greedy peeling of a_hat_0..a_hat_m from the recovered product bases.

    The largest base is a_hat_0^2; after the products of each newly found
    component with all earlier ones are removed, the largest survivor is
    always a_hat_0 times the next component.
    """
    vals = np.asarray(bases, dtype=complex)
    if vals.ndim != 1 or vals.size != lowpass_order(d):
        raise PeelingError(
            f"expected {lowpass_order(d)} bases for d = {d}, got {vals.size}")
    scale = float(np.abs(vals).max())
    if np.abs(np.imag(vals)).max() > cap_rel * scale:
        raise PeelingError("bases are not numerically real")
    live = np.real(vals).astype(float)
    alive = np.ones(live.size, dtype=bool)
    m = d // 2

    def _pop_max() -> float:
        idx = np.flatnonzero(alive)
        top = idx[np.argmax(live[idx])]
        alive[top] = False
        return float(live[top])

    def _consume(target: float) -> None:
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            raise PeelingError("ran out of bases while peeling")
        near = idx[np.argmin(np.abs(live[idx] - target))]
        if abs(live[near] - target) > cap_rel * scale:
            raise PeelingError(
                f"no base within {cap_rel:.1e} * {scale:.3e} of expected "
                f"product {target:.6e}")
        alive[near] = False

    top = _pop_max()
    if top <= 0:
        raise PeelingError("largest base is not positive")
    a = np.empty(m + 1)
    a[0] = np.sqrt(top)
    for t in range(1, m + 1):
        a[t] = _pop_max() / a[0]
        if a[t] <= 0 or a[t] >= a[t - 1]:
            raise PeelingError(
                f"peeled values are not strictly decreasing at index {t}")
        for i in range(1, t + 1):
            _consume(a[t] * a[i])
    if np.any(alive):
        raise PeelingError("unconsumed bases remain after peeling")
    return a


def peel_lowpass_spectrum_exhaustive(bases, d: int,
                                     rel_tol: float = 1e-6) -> list[np.ndarray]:
    """All kernels consistent with the base multiset, by exhaustive search.

    Every ordered choice of anchor bases (a0^2, a0*a1, ..., a0*am) is tried
    and kept when the full product multiset matches after sorting. Used as
    the cross-check oracle for the greedy peel.
    """
    vals = np.sort(np.real(np.asarray(bases, dtype=complex)))
    K = lowpass_order(d)
    if vals.size != K:
        raise PeelingError(f"expected {K} bases for d = {d}, got {vals.size}")
    scale = float(np.abs(vals).max())
    m = d // 2
    found: list[np.ndarray] = []
    for choice in itertools.permutations(range(K), m + 1):
        head = vals[list(choice)]
        if head[0] <= 0:
            continue
        a0 = np.sqrt(head[0])
        cand = np.empty(m + 1)
        cand[0] = a0
        cand[1:] = head[1:] / a0
        if np.any(cand <= 0) or np.any(np.diff(cand) >= 0):
            continue
        products = np.sort([cand[j] * cand[k] for j, k in lowpass_pairs(d)])
        if np.abs(products - vals).max() > rel_tol * scale:
            continue
        if not any(np.allclose(cand, prev, rtol=0, atol=rel_tol * scale)
                   for prev in found):
            found.append(cand)
    return found


def _mirror_spectrum(a_half: np.ndarray, d: int) -> np.ndarray:
    out = np.empty(d)
    m = d // 2
    out[:m + 1] = a_half
    for k in range(m + 1, d):
        out[k] = a_half[d - k]
    return out


def _stacked_exponential_fit(sequences, K: int):
    """Shared-base Prony over several sample sequences.

    All sequences follow exponential sums with the same K bases, so their
    Hankel blocks share one kernel vector. Stacking the blocks before the
    SVD pools the information; coefficients are then fitted per sequence
    by (possibly rank-truncated) least squares.

    Returns (beta, etas, diagnostics).
    """
    blocks = []
    for i, h in enumerate(sequences):
        if h.size <= 2 * K:
            raise InsufficientSamplesError(
                f"sequence {i}: need more than 2K = {2 * K} samples, "
                f"got {h.size}")
        blocks.append(build_hankel(h, K).entries)
    stack = np.vstack(blocks)
    _, svals, vh = np.linalg.svd(stack, full_matrices=False)
    gamma = np.conj(vh[-1])
    sigma_min = float(svals[-1])
    kernel_gap = float(svals[-2] / svals[-1]) if svals[-1] > 0 else np.inf
    if kernel_gap < KERNEL_GAP_THRESHOLD:
        warnings.warn(
            f"stacked kernel direction unreliable: gap {kernel_gap:.3e}",
            UnreliableKernelWarning, stacklevel=3)
    beta = polynomial_roots(gamma)
    if beta.size != K:
        raise PeelingError(
            f"kernel polynomial lost degree: {beta.size} of {K} roots")
    etas = []
    residuals = []
    for h in sequences:
        V = build_vandermonde(beta, h.size)
        eta, _, _, _ = np.linalg.lstsq(V, h.astype(complex), rcond=None)
        etas.append(eta)
        scale = float(np.abs(h).max())
        misfit = float(np.abs(V @ eta - h).max())
        residuals.append(misfit / scale if scale > 0 else misfit)
    diag = {"sigma_min": sigma_min, "kernel_gap": kernel_gap,
            "fit_residuals": residuals}
    return beta, etas, diag


def _paired_coefficients(beta, eta, products, pairs, cap_rel):
    """Coefficients of one vector arranged by low-pass index pair."""
    perm = match_values(beta, products.astype(complex), cap_rel=cap_rel)
    return {pair: eta[perm[t]] for t, pair in enumerate(pairs)}, \
        float(np.abs(beta[perm] - products).max())


def _ratio_sign_guess(mag: np.ndarray, scale: float) -> np.ndarray:
    """One-step ratio predictor for the sign pattern; cheap but can miss
    crossings whose neighbourhood is not numerically negligible."""
    g = np.empty_like(mag)
    g[0] = mag[0]
    ratio = 1.0
    for ell in range(1, mag.size):
        pred = g[ell - 1] * ratio
        g[ell] = mag[ell] if abs(mag[ell] - pred) <= abs(mag[ell] + pred) \
            else -mag[ell]
        if abs(g[ell - 1]) > 1e-8 * scale:
            ratio = float(np.clip(g[ell] / g[ell - 1], -2.0, 2.0))
    return np.where(g >= 0.0, 1.0, -1.0)


def _candidate_flip_gaps(h: np.ndarray, limit: int) -> list[int]:
    """Gaps adjacent to local minima of h, deepest minima first.

    A sum with positive bases can only cross zero where its square dips,
    so every sign change sits next to a sampled local minimum.
    """
    L = h.size
    mins = [j for j in range(L)
            if (j == 0 or h[j] <= h[j - 1]) and (j == L - 1 or h[j] <= h[j + 1])]
    mins.sort(key=lambda j: h[j])
    gaps: list[int] = []
    for j in mins:
        for g in (j - 1, j):
            if 0 <= g <= L - 2 and g not in gaps:
                gaps.append(g)
    return gaps[:limit]


def _signs_from_gaps(L: int, gaps) -> np.ndarray:
    flips = np.zeros(L)
    for g in gaps:
        flips[g + 1] = 1.0
    return (-1.0) ** np.cumsum(flips)


def _signed_square_root(h: np.ndarray, n_bases: int, *,
                        site_limit: int = 16,
                        pattern_cap: int = 20000) -> np.ndarray:
    """Signed square root of a squared exponential-sum sample sequence.

    The underlying sum has n_bases positive bases, hence at most
    n_bases - 1 sign changes, and each sits next to a local minimum of h.
    Every sign pattern with crossings in gaps adjacent to the deepest
    minima is scored by the relative smallest singular value of its
    order-n_bases Hankel matrix, which vanishes exactly for the true
    pattern; the ratio predictor seeds the candidate set. The global
    sign stays undetermined.
    """
    mag = np.sqrt(np.maximum(np.asarray(h, dtype=float), 0.0))
    L = mag.size
    scale = float(mag.max())
    if scale == 0.0 or L <= 2 * n_bases:
        return mag
    max_cross = n_bases - 1
    gaps = _candidate_flip_gaps(mag, site_limit)
    while gaps and sum(math.comb(len(gaps), r)
                       for r in range(max_cross + 1)) > pattern_cap:
        gaps.pop()
    candidates = [_ratio_sign_guess(mag, scale)]
    for r in range(max_cross + 1):
        for subset in itertools.combinations(gaps, r):
            candidates.append(_signs_from_gaps(L, subset))
    best_score = np.inf
    best = mag
    for signs in candidates:
        seq = signs * mag
        svals = np.linalg.svd(build_hankel(seq, n_bases).entries,
                              compute_uv=False)
        score = float(svals[-1] / svals[0]) if svals[0] > 0 else 0.0
        if score < best_score:
            best_score = score
            best = seq
    return best


def _product_design(a_half: np.ndarray, pairs, L: int) -> np.ndarray:
    """Real Vandermonde of the pairwise products a_k a_j, one column per pair."""
    products = np.array([a_half[j] * a_half[k] for j, k in pairs])
    return products[np.newaxis, :] ** np.arange(L)[:, np.newaxis]


def _structural_residual(a_half, x_hat, ensemble, d, phi_hats, scales):
    """Scaled misfit of |<x, A^l phi_i>|^2 against the samples."""
    spectrum = _mirror_spectrum(a_half, d)
    out = []
    for i, h in enumerate(ensemble.samples):
        c = np.conj(x_hat) * phi_hats[i] / d
        z = (spectrum[np.newaxis, :] ** np.arange(h.size)[:, np.newaxis]) @ c
        out.append((np.abs(z) ** 2 - h) / scales[i])
    return np.concatenate(out)


def _refine_signal_model(a_init, x_hat_init, ensemble, d: int, *,
                         max_nfev: int = 400):
    """Joint polish of kernel values and signal spectrum.

    Parametrizes the samples by the m+1 kernel values and the d complex
    signal frequencies, the full degree-of-freedom count of the model.
    Unlike a linear coefficient refit this cannot trade kernel error
    against unstructured coefficients, so it restores accuracy when the
    product Vandermonde is nearly rank deficient. The signal is fitted
    alone first, with the kernel frozen, because its initial guess from
    the linear solves is usually the rougher of the two.
    """
    m = d // 2
    phi_hats = np.array([dft(p) for p in ensemble.phis])
    scales = [max(float(np.abs(h).max()), 1e-300) for h in ensemble.samples]
    a0 = np.asarray(a_init, dtype=float)

    def signal_residual(xi):
        return _structural_residual(a0, xi[:d] + 1j * xi[d:], ensemble, d,
                                    phi_hats, scales)

    xi0 = np.concatenate([np.real(x_hat_init), np.imag(x_hat_init)])
    warm = least_squares(signal_residual, xi0, method="lm", max_nfev=200)
    if np.abs(warm.fun).max() < np.abs(signal_residual(xi0)).max():
        xi0 = np.asarray(warm.x)

    def unpack(theta):
        a_half = theta[:m + 1]
        x_hat = theta[m + 1:m + 1 + d] + 1j * theta[m + 1 + d:]
        return a_half, x_hat

    def residual(theta):
        a_half, x_hat = unpack(theta)
        return _structural_residual(a_half, x_hat, ensemble, d, phi_hats,
                                    scales)

    theta0 = np.concatenate([a0, xi0])
    r0 = residual(theta0)
    sol = least_squares(residual, theta0, method="lm", max_nfev=max_nfev)
    nfev = int(warm.nfev + sol.nfev)
    if np.abs(sol.fun).max() >= np.abs(r0).max():
        return a0, xi0[:d] + 1j * xi0[d:], float(np.abs(r0).max()), nfev
    a_half, x_hat = unpack(np.asarray(sol.x))
    return a_half, x_hat, float(np.abs(sol.fun).max()), nfev


def _complex_linear_solves(coeff_maps, phi_hats, d: int):
    """Initial x_hat from the per-frequency real linear systems.

    The k = 0 coefficient of the first vector is gauged real positive and
    spread to the others through the known phi_hat ratios; each frequency
    pair (k, -k) is a real 4x4 system in (Re, Im) of x_hat_{k}, x_hat_{-k}.
    """
    m = d // 2
    c00_mag = np.sqrt(max(np.real(coeff_maps[0][(0, 0)]), 0.0))
    if c00_mag == 0.0:
        raise HypothesisError("vanishing (0,0) coefficient")
    c0 = c00_mag * phi_hats[:, 0] / phi_hats[0, 0]
    x_hat = np.zeros(d, dtype=complex)
    x_hat[0] = np.conj(d * c0[0] / phi_hats[0, 0])
    top = m if d % 2 == 1 else m - 1
    conds = []
    for k in range(1, top + 1):
        rows = []
        rhs = []
        for i in range(len(coeff_maps)):
            w = c0[i] * np.conj(phi_hats[i, k]) / d
            wp = c0[i] * np.conj(phi_hats[i, d - k]) / d
            rows.append([np.real(w), -np.imag(w), np.real(wp), -np.imag(wp)])
            rhs.append(0.5 * np.real(coeff_maps[i][(k, 0)]))
        M = np.array(rows)
        cond = np.linalg.cond(M)
        conds.append(cond)
        if not np.isfinite(cond) or cond > FREQUENCY_COND_MAX:
            raise IllConditionedError(
                f"frequency {k}: 4x4 coefficient system ill posed",
                condition=float(cond))
        sol = np.linalg.solve(M, np.array(rhs))
        x_hat[k] = sol[0] + 1j * sol[1]
        x_hat[d - k] = sol[2] + 1j * sol[3]
    if d % 2 == 0 and d >= 2:
        rows = []
        rhs = []
        for i in range(len(coeff_maps)):
            w = c0[i] * np.conj(phi_hats[i, m]) / d
            rows.append([np.real(w), -np.imag(w)])
            rhs.append(0.5 * np.real(coeff_maps[i][(m, 0)]))
        sol, _, rank, _ = np.linalg.lstsq(np.array(rows), np.array(rhs),
                                          rcond=None)
        if rank < 2:
            raise IllConditionedError("Nyquist frequency system rank deficient")
        x_hat[m] = sol[0] + 1j * sol[1]
    return x_hat, conds


def _complex_candidate(a_init, ensemble, d: int, phi_hats):
    """Full solution chain from one candidate set of kernel values.

    Product coefficients fitted at the candidate kernel feed the linear
    solves for an initial signal spectrum; kernel and signal are then
    polished jointly. The unstructured coefficient fit is deliberately
    not iterated on its own: its objective is degenerate for clustered
    products and can drift away from a good candidate.

    Returns (residual, a_half, x_hat, diagnostics).
    """
    pairs = lowpass_pairs(d)
    a_init = np.asarray(a_init, dtype=float)
    best = None
    # truncating the near-null directions of the product Vandermonde keeps
    # the coefficient estimates sane when the products cluster; the plain
    # fit is kept as a fallback for the cases truncation would distort
    for rcond in (1e-8, None):
        coeff_maps = []
        for h in ensemble.samples:
            V = _product_design(a_init, pairs, h.size)
            G = np.linalg.lstsq(V, h, rcond=rcond)[0]
            coeff_maps.append({pair: G[t] for t, pair in enumerate(pairs)})
        x_hat0, conds = _complex_linear_solves(coeff_maps, phi_hats, d)
        a_half, x_hat, residual, nfev = _refine_signal_model(
            a_init, x_hat0, ensemble, d, max_nfev=400)
        if best is None or residual < best[0]:
            best = (residual, a_half, x_hat,
                    {"refine_nfev": nfev,
                     "max_frequency_condition": max(conds, default=1.0)})
        if best[0] <= 1e-12:
            break
    residual, a_half, x_hat, diag = best
    if np.any(a_half <= 0) or np.any(np.diff(a_half) >= 0):
        raise PeelingError("refined kernel values are not strictly "
                           "decreasing and positive")
    return residual, a_half, x_hat, diag


def _real_model_residual(a_half, r, ensemble, gam) -> float:
    """Worst relative misfit of the squared-sum model over all vectors."""
    worst = 0.0
    for i, h in enumerate(ensemble.samples):
        powers = a_half[np.newaxis, :] ** np.arange(h.size)[:, np.newaxis]
        model = (powers @ (gam * r[i])) ** 2
        scale = float(np.abs(h).max())
        if scale > 0:
            worst = max(worst, float(np.abs(model - h).max()) / scale)
    return worst


def _real_product_path(ensemble, d, peel_cap):
    """Kernel and signed coefficients via order-K product Prony + peel."""
    m = d // 2
    K = lowpass_order(d)
    gam = lowpass_multiplicities(d)
    beta, etas, diag = _stacked_exponential_fit(ensemble.samples, K)
    a_half = peel_lowpass_spectrum(beta, d, cap_rel=peel_cap)
    pairs = lowpass_pairs(d)
    products = np.array([a_half[j] * a_half[k] for j, k in pairs])
    r = np.empty((len(etas), m + 1))
    match_dists = []
    for i, eta in enumerate(etas):
        coeffs, dist = _paired_coefficients(beta, eta, products, pairs,
                                            peel_cap)
        match_dists.append(dist)
        c00 = np.real(coeffs[(0, 0)])
        if c00 < 0:
            raise HypothesisError(f"vector {i}: negative (0,0) coefficient")
        r[i, 0] = np.sqrt(c00)
        for k in range(1, m + 1):
            r[i, k] = np.real(coeffs[(k, 0)]) / (2.0 * gam[k] * r[i, 0])
    diag = dict(diag)
    diag["match_distances"] = match_dists
    return a_half, r, diag


def _real_square_root_path(ensemble, d, cap_rel):
    """Kernel and signed coefficients via sign-tracked square roots.

    Each sequence is (sum_k gamma_k r_k a_hat_k^l)^2, so +-sqrt reduces to
    an (m+1)-term sum with the kernel values as bases. The stacked fit
    shares the bases across vectors; value order gives the frequencies
    because the kernel decreases strictly.
    """
    m = d // 2
    gam = lowpass_multiplicities(d)
    gs = [_signed_square_root(h, m + 1) for h in ensemble.samples]
    beta, etas, diag = _stacked_exponential_fit(gs, m + 1)
    scale = float(np.abs(beta).max())
    if np.abs(np.imag(beta)).max() > cap_rel * scale:
        raise PeelingError("square-root bases are not numerically real")
    vals = np.real(beta)
    order = np.argsort(-vals)
    a_half = vals[order]
    if a_half[-1] <= 0:
        raise PeelingError("square-root bases are not all positive")
    if np.any(np.diff(a_half) >= 0):
        raise PeelingError("square-root bases are not strictly decreasing")
    r = np.empty((len(etas), m + 1))
    for i, eta in enumerate(etas):
        u = np.real(eta[order])
        r[i] = u / gam
    return a_half, r, dict(diag)


def recover_lowpass_real(ensemble, d: int | None = None, *,
                         peel_cap: float = PEEL_CAP) -> RecoveryResult:
    """Recover a low-pass kernel and a real signal from two real vectors.

    Both extraction routes (product peel, square root) are attempted and
    the one with the smaller sample-domain residual wins. Signed
    coefficients r_{i,k} = Re[conj(x_hat_k) phi_hat_{i,k}]/d follow from
    the gauge r_{0,0} > 0 (vector 1 inherits its sign through phi_hat
    ratios); per-frequency 2x2 real systems then give x_hat. The signal
    is recovered up to a global sign.
    """
    if ensemble.num_vectors != 2:
        raise HypothesisError(
            f"need exactly 2 sampling vectors, got {ensemble.num_vectors}")
    dim = ensemble.phis[0].size
    if d is None:
        d = dim
    if d != dim:
        raise ValueError(f"d = {d} disagrees with vector length {dim}")
    m = d // 2
    gam = lowpass_multiplicities(d)
    phi_hats = np.array([dft(p) for p in ensemble.phis])
    if np.abs(np.real(phi_hats[:, 0])).min() < 1e-12:
        raise HypothesisError("phi_hat vanishes at frequency 0")

    candidates = []
    failures = []
    for name, path in (("product-peel", _real_product_path),
                       ("square-root", _real_square_root_path)):
        try:
            a_half, r, diag = path(ensemble, d, peel_cap)
        except (PeelingError, PairingError, IllConditionedError,
                InsufficientSamplesError) as exc:
            failures.append(f"{name}: {exc}")
            continue
        residual = _real_model_residual(a_half, r, ensemble, gam)
        candidates.append((residual, name, a_half, r, diag))
    if not candidates:
        raise PeelingError(
            "all extraction routes failed (" + "; ".join(failures) + ")")
    candidates.sort(key=lambda c: c[0])
    residual, method, a_half, r, diag = candidates[0]
    if residual > RESIDUAL_TOL:
        warnings.warn(
            f"best extraction route ({method}) leaves relative residual "
            f"{residual:.3e}", UnreliableKernelWarning, stacklevel=2)

    # gauge: r_{0,0} > 0; the ratio r_{1,0}/r_{0,0} = phi_hat ratio fixes
    # the sign of the second vector
    if r[0, 0] < 0:
        r[0] = -r[0]
    ratio_sign = np.sign(np.real(phi_hats[1, 0]) * np.real(phi_hats[0, 0]))
    if np.sign(r[1, 0]) != ratio_sign * np.sign(r[0, 0]):
        r[1] = -r[1]

    x_hat = np.zeros(d, dtype=complex)
    A0 = np.real(phi_hats[:, 0]).reshape(2, 1)
    x_hat[0] = np.linalg.lstsq(A0, d * r[:, 0], rcond=None)[0][0]
    top = m if d % 2 == 1 else m - 1
    conds = []
    for k in range(1, top + 1):
        M = np.array([[np.real(phi_hats[0, k]), np.imag(phi_hats[0, k])],
                      [np.real(phi_hats[1, k]), np.imag(phi_hats[1, k])]])
        cond = np.linalg.cond(M)
        conds.append(cond)
        if not np.isfinite(cond) or cond > FREQUENCY_COND_MAX:
            raise IllConditionedError(
                f"frequency {k}: sampling vectors are pointwise dependent",
                condition=float(cond))
        re_im = np.linalg.solve(M, d * r[:, k])
        x_hat[k] = re_im[0] + 1j * re_im[1]
        x_hat[d - k] = np.conj(x_hat[k])
    if d % 2 == 0 and d >= 2:
        An = np.real(phi_hats[:, m]).reshape(2, 1)
        if np.abs(An).max() < 1e-12:
            raise HypothesisError("phi_hat vanishes at the Nyquist frequency")
        x_hat[m] = np.linalg.lstsq(An, d * r[:, m], rcond=None)[0][0]
    x = np.real(idft(x_hat))
    diag = dict(diag)
    diag["method"] = method
    diag["model_residual"] = residual
    diag["max_frequency_condition"] = max(conds, default=1.0)
    if failures:
        diag["failed_routes"] = failures
    return RecoveryResult(
        spectrum=_mirror_spectrum(a_half, d).astype(complex),
        signal=x.astype(complex),
        gauge={"convention": "r_{0,0} > 0 (global sign undetermined)"},
        diagnostics=diag)


def recover_lowpass_complex(ensemble, d: int | None = None, *,
                            peel_cap: float = PEEL_CAP) -> RecoveryResult:
    """Recover a low-pass kernel and a complex signal from four vectors.

    The product bases are shared by all four vectors, so one stacked Prony
    run recovers them before peeling. The k = 0 coefficient of the first
    vector is gauged real-positive and spread to the others through the
    known phi_hat ratios; each frequency pair (k, -k) is then a real 4x4
    linear system in (Re, Im) of x_hat_{k} and x_hat_{-k}.
    """
    if ensemble.num_vectors != 4:
        raise HypothesisError(
            f"need exactly 4 sampling vectors, got {ensemble.num_vectors}")
    dim = ensemble.phis[0].size
    if d is None:
        d = dim
    if d != dim:
        raise ValueError(f"d = {d} disagrees with vector length {dim}")
    m = d // 2
    K = lowpass_order(d)
    beta, _, diag = _stacked_exponential_fit(ensemble.samples, K)
    phi_hats = np.array([dft(p) for p in ensemble.phis])
    if np.abs(phi_hats[:, 0]).min() < 1e-12:
        raise HypothesisError("phi_hat vanishes at frequency 0")

    # structural residual tolerated before trying alternative peels; with
    # noisy samples the fit cannot beat the noise floor
    min_scale = min(max(float(np.abs(h).max()), 1e-300)
                    for h in ensemble.samples)
    accept = max(1e-12, 10.0 * ensemble.noise_level / min_scale)

    best = None
    failures = []
    tried: list[np.ndarray] = []

    def _try(a_init) -> None:
        nonlocal best
        for prev in tried:
            if np.abs(prev - a_init).max() < 1e-6:
                return
        tried.append(np.asarray(a_init, dtype=float))
        try:
            cand = _complex_candidate(a_init, ensemble, d, phi_hats)
        except (PeelingError, PairingError, IllConditionedError,
                HypothesisError) as exc:
            failures.append(str(exc))
            return
        if best is None or cand[0] < best[0]:
            best = cand

    try:
        _try(peel_lowpass_spectrum(beta, d, cap_rel=peel_cap))
    except PeelingError as exc:
        failures.append(f"strict peel: {exc}")
    if best is None or best[0] > accept:
        # wrong product associations surface as a large structural
        # residual, so score every association consistent with the roots
        try:
            _try(peel_lowpass_spectrum(beta, d, cap_rel=0.25))
        except PeelingError as exc:
            failures.append(f"forgiving peel: {exc}")
        for cand_init in peel_lowpass_spectrum_exhaustive(
                beta, d, rel_tol=0.02)[:12]:
            _try(cand_init)
    if best is None:
        raise PeelingError(
            "all kernel candidates failed (" + "; ".join(failures) + ")")

    model_residual, a_half, x_hat, cand_diag = best
    # restore the gauge the polish may have rotated away
    c00 = np.conj(x_hat[0]) * phi_hats[0, 0] / d
    if np.abs(c00) > 0:
        x_hat = x_hat * (c00 / np.abs(c00))
    if model_residual > RESIDUAL_TOL:
        warnings.warn(
            f"structural fit leaves relative residual {model_residual:.3e}",
            UnreliableKernelWarning, stacklevel=2)
    x = idft(x_hat)
    diag = dict(diag)
    diag.update(cand_diag)
    diag["model_residual"] = model_residual
    diag["candidates_tried"] = len(tried)
    return RecoveryResult(
        spectrum=_mirror_spectrum(a_half, d).astype(complex),
        signal=x,
        gauge={"convention": "c_{0,0} real positive (global phase undetermined)"},
        diagnostics=diag)
