"""Unordered spectrum recovery from a single sampling vector.

Neither the signal nor the eigenvalue order is known: the d diagonal
products give the magnitudes, conjugate product pairs are matched through
the magnitude products, and relative phases are placed by intersecting two
candidate placements per eigenvalue. The assembled estimate is then
polished against the raw samples through the rank-one exponential model
|sum_k c_k lambda_k^l|^2, which repairs the accuracy lost to a nearly
rank-deficient product Hankel. When the strict classification fails, a
relaxed pass enumerates plausible diagonal/cross splits and keeps the
first one whose polished model reproduces the samples to machine level.
The output is the spectrum multiset up to global phase and winding
direction.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import least_squares

from ..errors import (HypothesisError, IllConditionedError,
                      InsufficientSamplesError, PairingError, WindingError)
from ..prony import (approximate_prony, build_hankel, kernel_vector,
                     polynomial_roots)
from .products import MATCH_CAP, ProductTable, RecoveryResult, match_values

# Hard ceiling on the relative imaginary part of a diagonal product base.
REAL_TOL = 0.05

# The least-imaginary d bases must beat the rest by this factor.
REAL_SEPARATION = 2.0

# Runner-up candidate pairings within this factor of the winner are ambiguous.
AMBIGUITY_FACTOR = 2.0

# Polished-model weighted sample residual certifying a relaxed candidate
# assembly; the weighting floor keeps it far above float noise yet far
# below what any structurally wrong model can reach.
MODEL_ACCEPT = 1e-8

# Assignment-cap ladder for the relaxed pass.
RELAXED_CAPS = (5e-3, 5e-2, 0.15)

# Diagonal candidates for relaxed splits must lie this close to the ray.
RELAXED_RAY_TOL = 0.3

# Caps on enumerated splits and on model polishes per call.
_SPLIT_LIMIT = 200
_REFINE_BUDGET = 40

# Solver-iteration cap for the first-pass polish of each cross-only
# candidate, how many of the best leftovers get a full-length polish, and
# the cap for those: long product decay makes the model Jacobian nearly
# singular in some directions, so convergence can need well over the
# default budget.
_QUICK_NFEV = 150
_FULL_REFINES = 4
_FULL_NFEV = 2400

# Assignments kept per tier for coefficient-misfit screening, and the
# log-consistency level beyond which an assignment is discarded outright.
_PRESCREEN_POOL = 48
_SCORE_CUT = 2.0

_TWO_PI = 2.0 * np.pi


def _circ_dist(a: float, b: float) -> float:
    r = np.mod(a - b, _TWO_PI)
    return float(min(r, _TWO_PI - r))


def _ray_rel(beta: np.ndarray) -> np.ndarray:
    """Relative distance of each base from the positive real ray."""
    ray = np.where(np.real(beta) > 0, np.abs(np.imag(beta)), np.abs(beta))
    return ray / np.maximum(1.0, np.abs(beta))


def _classify(beta: np.ndarray, d: int, real_tol: float):
    # exactly d of the d^2 product bases are positive reals (the squared
    # moduli), so classify by count: the d bases closest to the positive
    # real ray are the diagonal candidates, provided they separate
    # cleanly from the rest
    ray = _ray_rel(beta)
    by_dist = np.argsort(ray)
    real_idx = by_dist[:d]
    complex_idx = by_dist[d:]
    if ray[real_idx].max() > real_tol:
        raise HypothesisError(
            f"only {int(np.sum(ray <= real_tol))} of {d} expected "
            "positive real product bases found; spectrum may not be "
            "absolutely collision-free")
    if (complex_idx.size
            and REAL_SEPARATION * ray[real_idx].max()
            > ray[complex_idx].min()):
        raise HypothesisError(
            "diagonal and cross product bases do not separate cleanly "
            f"({ray[real_idx].max():.3e} vs {ray[complex_idx].min():.3e})")
    return real_idx, complex_idx


def _assemble(beta, d: int, real_idx, complex_idx, match_cap: float,
              ambiguity_factor):
    """Magnitudes, relative phases, and the tau map for one diagonal split.

    ambiguity_factor None skips the runner-up check and keeps the winner;
    the caller is then expected to validate the result downstream.
    """
    real_vals = np.real(beta[real_idx])
    if np.any(real_vals <= 0):
        raise HypothesisError("a diagonal product base is not positive")
    order = np.argsort(-real_vals)
    diag_idx = real_idx[order]              # descending |lambda_j|^2
    mags = np.sqrt(real_vals[order])
    plus = complex_idx[np.imag(beta[complex_idx]) > 0]
    minus = complex_idx[np.imag(beta[complex_idx]) < 0]
    if plus.size != minus.size or plus.size != (d * d - d) // 2:
        raise HypothesisError(
            f"complex bases do not split into conjugate pairs "
            f"({plus.size} up, {minus.size} down for d = {d})")

    tau: dict = {(j, j): int(diag_idx[j]) for j in range(d)}
    pair_keys = [(j, k) for j in range(d) for k in range(j)]  # j > k
    if pair_keys:
        # conjugate partners first, then pair modulus -> (j, k) assignment
        partner_perm = match_values(np.conj(beta[minus]), beta[plus],
                                    cap_rel=match_cap)
        pair_mods = 0.5 * (np.abs(beta[plus])
                           + np.abs(beta[minus[partner_perm]]))
        targets = np.array([mags[j] * mags[k] for j, k in pair_keys])
        assign = match_values(pair_mods.astype(complex),
                              targets.astype(complex), cap_rel=match_cap)
    args = np.zeros(d)
    winner_dists = []
    if d >= 2:
        plus_of = {}
        for t, (j, k) in enumerate(pair_keys):
            p = plus[assign[t]]
            q = minus[partner_perm[assign[t]]]
            plus_of[(j, k)] = (int(p), int(q))
        # winding convention: the (1, 0) product representative with
        # Im > 0 is taken as lambda_1 conj(lambda_0)... the gauge sets
        # arg mu_0 = 0, so arg mu_1 = +angle of that representative when it
        # estimates mu_1 conj(mu_0).
        z10 = beta[plus_of[(1, 0)][0]]
        args[1] = np.angle(z10)
        for k in range(2, d):
            zk0 = beta[plus_of[(k, 0)][0]]
            zk1 = beta[plus_of[(k, 1)][0]]
            cand_a = [np.angle(zk0), -np.angle(zk0)]
            cand_b = [args[1] + np.angle(zk1), args[1] - np.angle(zk1)]
            combos = [(ia, ib, _circ_dist(cand_a[ia], cand_b[ib]))
                      for ia in range(2) for ib in range(2)]
            combos.sort(key=lambda t: t[2])
            winner = combos[0]
            runner = combos[1]
            if (ambiguity_factor is not None
                    and runner[2] < ambiguity_factor * winner[2]):
                raise WindingError(
                    f"phase placement ambiguous for eigenvalue {k}: "
                    f"runner-up distance {runner[2]:.3e} within "
                    f"{ambiguity_factor}x of winner {winner[2]:.3e}")
            args[k] = cand_a[winner[0]]
            winner_dists.append(winner[2])
        # orient the off-diagonal tau entries to the chosen winding
        for (j, k) in pair_keys:
            p, q = plus_of[(j, k)]
            expected = args[j] - args[k]
            if (_circ_dist(np.angle(beta[p]), expected)
                    <= _circ_dist(np.angle(beta[q]), expected)):
                tau[(j, k)], tau[(k, j)] = p, q
            else:
                tau[(j, k)], tau[(k, j)] = q, p
    return mags, args, tau, winner_dists


def _factor_coefficients(eta, tau, d: int) -> np.ndarray:
    """Rank-one factor of the coefficient products, anchor gauged real."""
    diag = np.array([np.real(eta[tau[(j, j)]]) for j in range(d)])
    anchor = int(np.argmax(diag))
    if diag[anchor] <= 0:
        raise PairingError("no positive diagonal coefficient to anchor on")
    c = np.empty(d, dtype=complex)
    c[anchor] = math.sqrt(diag[anchor])
    for j in range(d):
        if j != anchor:
            c[j] = eta[tau[(j, anchor)]] / c[anchor]
    return c


def _model_samples(lam: np.ndarray, c: np.ndarray, L: int) -> np.ndarray:
    powers = lam[np.newaxis, :] ** np.arange(L)[:, np.newaxis]
    return np.abs(powers @ c) ** 2


def _refine_patch_model(lam0, c0, h, *, noise_level: float = 0.0,
                        max_nfev: int = 600):
    """Polish (lambda, c) against the raw samples.

    Residuals are weighted per sample relative to the sample itself: the
    geometric decay spans many orders of magnitude and a max-scaled fit
    would waste most of the record. The weighting floor keeps samples at
    the float (or noise) level from dominating. The model carries two flat
    phase directions (rotating all lambda_k or all c_k together);
    Levenberg-Marquardt damping leaves them alone. Falls back to the
    initial guess when the fit does not improve, and skips the solve when
    there are fewer samples than parameters.
    """
    d = lam0.size
    L = h.size
    scale = max(float(np.abs(h).max()), 1e-300)
    floor = max(1e-14 * scale, 3.0 * noise_level)
    wts = 1.0 / np.maximum(h, floor)
    ell = np.arange(L)[:, np.newaxis]

    def unpack(theta):
        lam = theta[:d] + 1j * theta[d:2 * d]
        c = theta[2 * d:3 * d] + 1j * theta[3 * d:]
        return lam, c

    def residual(theta):
        lam, c = unpack(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            r = (_model_samples(lam, c, L) - h) * wts
        return np.nan_to_num(r, nan=1e100, posinf=1e100, neginf=-1e100)

    def jacobian(theta):
        lam, c = unpack(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            powers = lam[np.newaxis, :] ** ell
            z = powers @ c
            shifted = np.zeros_like(powers)
            shifted[1:] = lam[np.newaxis, :] ** (ell[1:] - 1)
            d_lam = np.conj(z)[:, np.newaxis] * (c[np.newaxis, :] * ell
                                                 * shifted)
            d_c = np.conj(z)[:, np.newaxis] * powers
            J = np.empty((L, 4 * d))
            J[:, :d] = 2.0 * np.real(d_lam)
            J[:, d:2 * d] = -2.0 * np.imag(d_lam)
            J[:, 2 * d:3 * d] = 2.0 * np.real(d_c)
            J[:, 3 * d:] = -2.0 * np.imag(d_c)
            J *= wts[:, np.newaxis]
        return np.nan_to_num(J, nan=1e100, posinf=1e100, neginf=-1e100)

    theta0 = np.concatenate([lam0.real, lam0.imag, c0.real, c0.imag])
    r0 = float(np.abs(residual(theta0)).max())
    if L < theta0.size:
        return lam0, c0, r0, 0

    def residual_c(xc):
        return residual(np.concatenate([theta0[:2 * d], xc]))

    def jacobian_c(xc):
        return jacobian(np.concatenate([theta0[:2 * d], xc]))[:, 2 * d:]

    # Coefficients first with the bases frozen: a poor coefficient guess
    # can drag the joint solve away from an accurate base estimate.
    warm = least_squares(residual_c, theta0[2 * d:], jac=jacobian_c,
                        method="lm", max_nfev=200)
    nfev = int(warm.nfev)
    if float(np.abs(warm.fun).max()) < r0:
        theta0 = np.concatenate([theta0[:2 * d], warm.x])
        r0 = float(np.abs(warm.fun).max())
    sol = least_squares(residual, theta0, jac=jacobian, method="lm",
                        max_nfev=max_nfev)
    nfev += int(sol.nfev)
    if float(np.abs(sol.fun).max()) >= r0:
        lam, c = unpack(theta0)
        return lam, c, r0, nfev
    lam, c = unpack(np.asarray(sol.x))
    return lam, c, float(np.abs(sol.fun).max()), nfev


def _products_separated(lam: np.ndarray, floor: float = 1e-6) -> bool:
    """Pairwise-distinct product check guarding the relaxed acceptance."""
    prods = np.outer(lam, np.conj(lam)).ravel()
    scale = float(np.abs(prods).max())
    if scale == 0.0:
        return False
    if prods.size < 2:
        return True
    diff = np.abs(prods[:, np.newaxis] - prods[np.newaxis, :])
    np.fill_diagonal(diff, np.inf)
    return float(diff.min()) >= floor * scale


def _relaxed_splits(beta: np.ndarray, d: int):
    """Candidate diagonal index sets near the ray, best max distance first."""
    ray = _ray_rel(beta)
    pool = np.where((np.real(beta) > 0) & (ray <= RELAXED_RAY_TOL))[0]
    pool = pool[np.argsort(ray[pool])]
    if pool.size < d:
        return []
    n = int(pool.size)
    while n > d and math.comb(n, d) > _SPLIT_LIMIT:
        n -= 1
    splits = []
    for combo in itertools.combinations(range(n), d):
        real_idx = pool[list(combo)]
        mask = np.ones(beta.size, dtype=bool)
        mask[real_idx] = False
        splits.append((np.asarray(real_idx), np.where(mask)[0],
                       float(ray[real_idx].max())))
    splits.sort(key=lambda t: t[2])
    return [(r, c) for r, c, _ in splits]


def _rank_one_coefficients(lam: np.ndarray, h: np.ndarray,
                           rcond: float = 1e-8) -> np.ndarray:
    """Coefficient init at fixed bases: Hermitian fit, best rank-one factor.

    Solves the linear system in the products c_j conj(c_k) with the
    near-null directions truncated, then factors the Hermitian matrix
    through its leading eigenpair.
    """
    d = lam.size
    L = h.size
    ells = np.arange(L)
    cols = [np.abs(lam[j]) ** (2 * ells) for j in range(d)]
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        bp = (lam[j] * np.conj(lam[k])) ** ells
        cols.append(2.0 * bp.real)
        cols.append(-2.0 * bp.imag)
    A = np.column_stack(cols)
    u = np.linalg.lstsq(A, h, rcond=rcond)[0]
    C = np.zeros((d, d), dtype=complex)
    for j in range(d):
        C[j, j] = u[j]
    for t, (j, k) in enumerate(pairs):
        C[j, k] = u[d + 2 * t] + 1j * u[d + 2 * t + 1]
        C[k, j] = np.conj(C[j, k])
    w, V = np.linalg.eigh(C)
    return V[:, -1] * math.sqrt(max(float(w[-1]), 0.0))


def _coefficients_with_misfit(lam: np.ndarray,
                              h: np.ndarray) -> tuple[float, np.ndarray]:
    """Coefficient init chosen across truncation levels by model misfit.

    The right truncation depends on how ill conditioned the product system
    is for the particular bases, so try a short ladder and keep whichever
    factor reproduces the samples best. The returned misfit doubles as a
    cheap plausibility score for the bases themselves: wrong magnitudes
    cannot be fit well by any rank-one coefficient matrix.
    """
    scale = max(float(np.abs(h).max()), 1e-300)
    wts = 1.0 / np.maximum(h, 1e-14 * scale)
    best = None
    for rcond in (1e-4, 1e-6, 1e-8):
        c = _rank_one_coefficients(lam, h, rcond=rcond)
        misfit = float(np.abs((_model_samples(lam, c, h.size) - h)
                              * wts).max())
        if best is None or misfit < best[0]:
            best = (misfit, c)
    return best


def _best_rank_one_coefficients(lam: np.ndarray, h: np.ndarray) -> np.ndarray:
    return _coefficients_with_misfit(lam, h)[1]


def _cross_only_candidates(beta, d: int, h, max_candidates: int = 24):
    """Inits that ignore the diagonal bases entirely (d = 3 or 4).

    Close eigenvalue moduli merge the diagonal Prony bases while the cross
    products stay separated, so the magnitudes are refit from the pair
    moduli alone: assignments of the conjugate pairs to index pairs are
    scored by multiplicative consistency in the log domain. Corrupted and
    ghost pairs are handled by also trying assignments that leave slots
    empty, one tier at a time, since sparser assignments constrain the
    magnitudes less. Two empty slots can leave the magnitudes genuinely
    underdetermined (two disjoint index pairs missing), so a final tier
    pins one diagonal to a near-real base to resolve that. Within a tier
    the survivors are ranked by how well any rank-one coefficient matrix
    reproduces the samples at the implied bases; the ranking is a
    heuristic, so callers should try candidates well past the first.
    Phases are placed by consistency voting over the assigned pairs.
    """
    if d < 3 or d > 4:
        return
    n_slots = (d * d - d) // 2
    plus_all = np.where(np.imag(beta) > 0)[0]
    minus_all = np.where(np.imag(beta) < 0)[0]
    if plus_all.size == 0 or minus_all.size == 0:
        return
    # greedy conjugate pairing; junk bases (merged diagonals, ghosts) may
    # form pairs of their own, so pairing alone does not vet anything
    scale_b = float(np.abs(beta).max())
    ranked = []
    for p in plus_all:
        dists = np.abs(np.conj(beta[minus_all]) - beta[p])
        m = int(np.argmin(dists))
        ranked.append((float(dists[m]), int(p), int(minus_all[m])))
    ranked.sort()
    chosen = []
    used = set()
    for dist, p, m in ranked:
        if dist > 0.05 * scale_b or m in used:
            continue
        chosen.append((p, m))
        used.add(m)
    chosen = chosen[:n_slots + 2]
    n_found = len(chosen)
    if n_found < d:
        return
    plus = np.array([p for p, _ in chosen])
    minus_sel = np.array([m for _, m in chosen])
    mods = 0.5 * (np.abs(beta[plus]) + np.abs(beta[minus_sel]))
    logs = np.log(np.maximum(mods, 1e-300))
    slots = [(j, k) for j in range(d) for k in range(j + 1, d)]
    inc = np.zeros((n_slots, d))
    for t, (j, k) in enumerate(slots):
        inc[t, j] = inc[t, k] = 1.0

    def place_phases(x, perm):
        """Bases plus phase-consistency cost, or None on a split graph.

        The cost sums the circular violations of the redundant pairs
        against the chosen placements. Sparse assignments can fit the pair
        moduli exactly no matter how the tokens are placed, so this is
        what separates correct assignments from coincidental ones.
        """
        mags = np.exp(x)
        order = np.argsort(-mags)
        rank = np.empty(d, dtype=int)
        rank[order] = np.arange(d)
        reps = {}                           # (J, K) with J > K -> plus index
        for t, (j, k) in enumerate(slots):
            if perm[t] < 0:
                continue
            J, K = sorted((int(rank[j]), int(rank[k])), reverse=True)
            reps[(J, K)] = int(plus[perm[t]])
        # breadth-first placement, choosing the candidate angle that the
        # other already-placed pairs agree with
        args = np.full(d, np.nan)
        args[0] = 0.0
        placed = {0}
        cost = 0.0
        while len(placed) < d:
            frontier = [(J, K) for (J, K) in reps
                        if (J in placed) != (K in placed)]
            if not frontier:
                return None
            J, K = frontier[0]
            new, anchor = (J, K) if K in placed else (K, J)
            ang = np.angle(beta[reps[(max(J, K), min(J, K))]])
            rel = ang if new == max(J, K) else -ang
            options = [args[anchor] + rel, args[anchor] - rel]

            def vote(v):
                total = 0.0
                for (A, B), p in reps.items():
                    other = B if A == new else (A if B == new else None)
                    if other is None or other not in placed:
                        continue
                    zr = np.angle(beta[p])
                    want = (v - args[other] if A == new
                            else args[other] - v)
                    total += min(_circ_dist(zr, want), _circ_dist(-zr, want))
                return total

            winner = min(options, key=vote)
            cost += vote(winner)
            args[int(new)] = winner
            placed.add(int(new))
        return mags[order] * np.exp(1j * args), cost

    # empty slots are marked -1 so every permutation tuple sorts and
    # hashes deterministically
    filled_cache = {}
    seen = []
    max_pad = 0 if d == 3 else 2
    for pad in range(max_pad + 1):
        filled = n_slots - pad
        if filled > n_found or filled < d:
            continue
        tokens = list(range(n_found)) + [-1] * pad
        scored = []
        for perm in set(itertools.permutations(tokens, n_slots)):
            if perm.count(-1) != pad:
                continue
            rows = [t for t in range(n_slots) if perm[t] >= 0]
            key = tuple(rows)
            if key not in filled_cache:
                filled_cache[key] = np.linalg.pinv(inc[rows])
            b = logs[[perm[t] for t in rows]]
            x = filled_cache[key] @ b
            score = float(np.abs(inc[rows] @ x - b).max())
            if score <= _SCORE_CUT:
                scored.append((score, perm, x))
        scored.sort(key=lambda t: (t[0], t[1]))
        ranked_full = []
        for score, perm, x in scored:
            placement = place_phases(x, perm)
            if placement is None:
                continue
            lam0, cost = placement
            ranked_full.append((score + cost, perm, lam0))
        ranked_full.sort(key=lambda t: (t[0], t[1]))
        pool = []
        for combined, perm, lam0 in ranked_full:
            if len(pool) >= _PRESCREEN_POOL:
                break
            signature = np.sort_complex(np.round(lam0, 9))
            if any(np.abs(signature - s).max() < 1e-8 for s in seen):
                continue
            seen.append(signature)
            misfit, c0 = _coefficients_with_misfit(lam0, h)
            pool.append((misfit, perm, lam0, c0))
        pool.sort(key=lambda t: (t[0], t[1]))
        for misfit, _, lam0, c0 in pool[:max_candidates]:
            yield lam0, c0

    if d != 4:
        return
    # Anchored tier. Two missing slots that form disjoint index pairs drop
    # the incidence rank to d - 1, so the magnitudes stay free along one
    # direction no matter how well the pair moduli fit. Pinning one
    # diagonal to a near-real base (row 2 e_j, target log r) restores full
    # rank and makes the score discriminating again.
    ray_b = np.abs(np.angle(beta))
    anchors = [int(i) for i in np.argsort(ray_b, kind="stable")
               if np.real(beta[i]) > 0 and ray_b[i] <= 0.1][:8]
    if not anchors:
        return
    scored = []
    for rows in itertools.combinations(range(n_slots), n_slots - 2):
        sub = inc[list(rows)]
        if np.linalg.matrix_rank(sub) == d:
            continue
        key = tuple(rows)
        if key not in filled_cache:
            filled_cache[key] = np.linalg.pinv(sub)
        for choice in itertools.permutations(range(n_found), len(rows)):
            b_cross = logs[list(choice)]
            x = filled_cache[key] @ b_cross
            if float(np.abs(sub @ x - b_cross).max()) > _SCORE_CUT:
                continue
            perm = [-1] * n_slots
            for t, tok in zip(rows, choice):
                perm[t] = tok
            perm = tuple(perm)
            for aj in range(d):
                akey = (key, aj)
                if akey not in filled_cache:
                    aug = np.vstack([sub, 2.0 * np.eye(d)[aj]])
                    filled_cache[akey] = (aug, np.linalg.pinv(aug))
                aug, pinv = filled_cache[akey]
                for ai in anchors:
                    b = np.append(b_cross, math.log(max(
                        float(np.abs(beta[ai])), 1e-300)))
                    xa = pinv @ b
                    score = float(np.abs(aug @ xa - b).max())
                    if score <= _SCORE_CUT:
                        scored.append((score, perm, aj, ai, xa))
    scored.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
    ranked_full = []
    for score, perm, aj, ai, xa in scored:
        placement = place_phases(xa, perm)
        if placement is None:
            continue
        lam0, cost = placement
        ranked_full.append((score + cost, perm, aj, ai, lam0))
    ranked_full.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
    pool = []
    for combined, perm, aj, ai, lam0 in ranked_full:
        if len(pool) >= _PRESCREEN_POOL:
            break
        signature = np.sort_complex(np.round(lam0, 9))
        if any(np.abs(signature - s).max() < 1e-8 for s in seen):
            continue
        seen.append(signature)
        misfit, c0 = _coefficients_with_misfit(lam0, h)
        pool.append((misfit, perm, aj, ai, lam0, c0))
    pool.sort(key=lambda t: (t[0], t[1], t[2], t[3]))
    for entry in pool[:max_candidates]:
        yield entry[4], entry[5]


def _structured_result(lam, c, d: int, diagnostics) -> RecoveryResult:
    """Gauge the polished model and synthesize its product table."""
    order = np.argsort(-np.abs(lam))
    lam = np.asarray(lam)[order]
    c = np.asarray(c)[order]
    if np.abs(lam[0]) > 0:
        lam = lam * np.conj(lam[0] / np.abs(lam[0]))
    if d >= 2 and np.imag(lam[1]) < 0:
        lam = np.conj(lam)
        c = np.conj(c)
    bases = np.outer(lam, np.conj(lam)).ravel()
    coeffs = np.outer(c, np.conj(c)).ravel()
    tau = {(j, k): j * d + k for j in range(d) for k in range(d)}
    table = ProductTable(bases=bases, coeffs=coeffs, tau=tau,
                         winding="undetermined")
    return RecoveryResult(
        spectrum=lam,
        gauge={"convention": "descending magnitude; largest real positive; "
                             "(1,0) product oriented to positive imaginary",
               "winding": "undetermined"},
        diagnostics=diagnostics,
        table=table)


def recover_unordered_spectrum(samples, d: int, *,
                               real_tol: float = REAL_TOL,
                               match_cap: float = MATCH_CAP,
                               ambiguity_factor: float = AMBIGUITY_FACTOR,
                               noise_level: float = 0.0
                               ) -> RecoveryResult:
    """Spectrum multiset of an absolutely collision-free system.

    Needs at least 2 d^2 + 1 noise-tolerant samples. The returned spectrum is
    sorted by descending magnitude, gauged so the largest eigenvalue is real
    positive, with the winding fixed by the convention that the (0, 1)
    product representative has positive imaginary part; the true spectrum
    matches one of the two conjugation orbits. noise_level widens the
    sample-residual gate used to certify relaxed classifications.
    """
    h = np.asarray(samples, dtype=float)
    K = d * d
    if h.size <= 2 * K:
        raise InsufficientSamplesError(
            f"need more than 2 d^2 = {2 * K} samples, got {h.size}")
    prony_error = None
    try:
        result = approximate_prony(h, K)
        beta = result.sum.beta
        eta = result.sum.eta
        base_diag = {"sigma_min": result.sigma_min,
                     "kernel_gap": result.kernel_gap,
                     "residual": result.residual}
    except IllConditionedError as err:
        # ghost bases from a merged product spectrum can coincide, which
        # leaves the coefficient solve rank deficient; the base positions
        # alone still feed the cross-product rescue below
        gamma, sigma_min = kernel_vector(build_hankel(h, K))
        beta = polynomial_roots(gamma)
        eta = None
        base_diag = {"sigma_min": sigma_min, "kernel_gap": float("nan"),
                     "residual": float("nan")}
        prony_error = err
    scale = max(float(np.abs(h).max()), 1e-300)

    def _candidate(real_idx, complex_idx, cap, amb):
        mags, args, tau, winner_dists = _assemble(beta, d, real_idx,
                                                  complex_idx, cap, amb)
        lam0 = mags * np.exp(1j * args)
        c0 = _factor_coefficients(eta, tau, d)
        return lam0, c0, winner_dists

    def _plain_residual(lam, c):
        return float(np.abs(_model_samples(lam, c, h.size) - h).max()) / scale

    def _certified(lam, c, weighted):
        if not _products_separated(lam):
            return False
        if noise_level == 0.0:
            return weighted <= MODEL_ACCEPT
        return _plain_residual(lam, c) <= 10.0 * noise_level / scale

    if eta is None:
        strict_error = prony_error
    else:
        try:
            real_idx, complex_idx = _classify(beta, d, real_tol)
            lam0, c0, winner_dists = _candidate(real_idx, complex_idx,
                                                match_cap, ambiguity_factor)
        except (HypothesisError, PairingError, WindingError) as err:
            strict_error = err
        else:
            lam, c, resid, nfev = _refine_patch_model(lam0, c0, h,
                                                      noise_level=noise_level)
            diag = dict(base_diag, method="strict", weighted_residual=resid,
                        model_residual=_plain_residual(lam, c),
                        refine_nfev=nfev,
                        max_winner_distance=max(winner_dists, default=0.0))
            return _structured_result(lam, c, d, diag)

    # the strict split failed: refit from the cross products alone, then
    # walk plausible diagonal/cross splits with progressively looser caps;
    # keep the first candidate whose polished model reproduces the samples.
    # No cheap score ranks the cross-only inits reliably, so every emitted
    # candidate gets a short refinement and only the best leftovers get a
    # full-length one.
    tried = 0
    leftovers = []
    for lam0, c0 in _cross_only_candidates(beta, d, h):
        lam, c, resid, nfev = _refine_patch_model(lam0, c0, h,
                                                  noise_level=noise_level,
                                                  max_nfev=_QUICK_NFEV)
        tried += 1
        if _certified(lam, c, resid):
            diag = dict(base_diag, method="cross-only",
                        weighted_residual=resid,
                        model_residual=_plain_residual(lam, c),
                        refine_nfev=nfev, candidates_tried=tried,
                        max_winner_distance=0.0)
            return _structured_result(lam, c, d, diag)
        leftovers.append((resid, tried, lam, c))
    leftovers.sort(key=lambda t: (t[0], t[1]))
    for _, _, lam1, c1 in leftovers[:_FULL_REFINES]:
        lam, c, resid, nfev = _refine_patch_model(lam1, c1, h,
                                                  noise_level=noise_level,
                                                  max_nfev=_FULL_NFEV)
        tried += 1
        if _certified(lam, c, resid):
            diag = dict(base_diag, method="cross-only",
                        weighted_residual=resid,
                        model_residual=_plain_residual(lam, c),
                        refine_nfev=nfev, candidates_tried=tried,
                        max_winner_distance=0.0)
            return _structured_result(lam, c, d, diag)
    caps = [cap for cap in RELAXED_CAPS if cap > match_cap] or [match_cap]
    splits = _relaxed_splits(beta, d) if eta is not None else []
    relaxed_tried = 0
    for cap in caps:
        for real_idx, complex_idx in splits:
            if relaxed_tried >= _REFINE_BUDGET:
                break
            try:
                lam0, c0, winner_dists = _candidate(real_idx, complex_idx,
                                                    cap, None)
            except (HypothesisError, PairingError, WindingError):
                continue
            lam, c, resid, nfev = _refine_patch_model(lam0, c0, h,
                                                      noise_level=noise_level)
            tried += 1
            relaxed_tried += 1
            if _certified(lam, c, resid):
                diag = dict(base_diag, method="relaxed",
                            weighted_residual=resid,
                            model_residual=_plain_residual(lam, c),
                            refine_nfev=nfev, candidates_tried=tried,
                            max_winner_distance=max(winner_dists,
                                                    default=0.0))
                return _structured_result(lam, c, d, diag)
        if relaxed_tried >= _REFINE_BUDGET:
            break
    raise strict_error
