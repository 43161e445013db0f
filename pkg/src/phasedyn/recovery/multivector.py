"""Joint spectrum and signal recovery from support-localized sampling vectors.

Each sampling vector touches only a few eigenspaces, so its samples form a
small exponential sum that is recovered independently; the partial spectra
are then stitched together: globally distinct eigenvalue magnitudes reveal
the index of every patch mode, breadth-first phase propagation over the
overlap graph keeps alignment paths shortest, and a real 2x2 system in
y_{k1} conj(y_{k2}) built from the known psi values fixes the winding.
"""
from __future__ import annotations

import collections

import numpy as np
import scipy.optimize

from ..errors import (HypothesisError, IllConditionedError, PairingError,
                      WindingError)
from .products import (MATCH_CAP, RecoveryResult, factor_rank_one_products)
from .unordered import AMBIGUITY_FACTOR, recover_unordered_spectrum

# Components of psi below this (relative) count as outside the support.
SUPPORT_TOL = 1e-9

# Normalized 2x2 determinants below this mean the winding system is singular.
WINDING_DET_TOL = 1e-8

_TWO_PI = 2.0 * np.pi


def _circ_dist(a: float, b: float) -> float:
    r = np.mod(a - b, _TWO_PI)
    return float(min(r, _TWO_PI - r))


def _unit(z: complex) -> complex:
    m = abs(z)
    if m == 0.0:
        raise PairingError("cannot normalize a zero rotation")
    return z / m


def _check_supports(psis, supports, d: int) -> None:
    for i, (psi, sup) in enumerate(zip(psis, supports)):
        scale = float(np.abs(psi).max())
        inside = np.zeros(d, dtype=bool)
        inside[list(sup)] = True
        if np.any(np.abs(psi[~inside]) > SUPPORT_TOL * scale):
            raise HypothesisError(
                f"vector {i}: psi has mass outside its declared support")
        if np.any(np.abs(psi[inside]) <= SUPPORT_TOL * scale):
            raise HypothesisError(
                f"vector {i}: psi vanishes inside its declared support")


def _cluster_by_magnitude(entries, d: int):
    """Partition pooled (patch, mode, magnitude) entries into d clusters.

    Clusters of one shared eigenvalue are contiguous once sorted, so the
    d - 1 largest consecutive gaps are the boundaries.
    """
    mags = np.array([e[2] for e in entries])
    order = np.argsort(-mags)
    sorted_entries = [entries[j] for j in order]
    sorted_mags = mags[order]
    if d == 1:
        clusters = [sorted_entries]
    else:
        gaps = sorted_mags[:-1] - sorted_mags[1:]
        if gaps.size < d - 1:
            raise PairingError(
                f"only {len(entries)} patch modes for {d} eigenvalues")
        cut_after = np.sort(np.argsort(-gaps)[:d - 1])
        clusters = []
        start = 0
        for cut in cut_after:
            clusters.append(sorted_entries[start:cut + 1])
            start = cut + 1
        clusters.append(sorted_entries[start:])
    margin = np.inf
    if d >= 2:
        within = max((max(m for _, _, m in c) - min(m for _, _, m in c))
                     for c in clusters)
        between = min(min(m for _, _, m in clusters[t])
                      - max(m for _, _, m in clusters[t + 1])
                      for t in range(d - 1))
        margin = np.inf if within == 0.0 else between / within
    for c in clusters:
        patch_ids = [i for i, _, _ in c]
        if len(set(patch_ids)) != len(patch_ids):
            raise PairingError(
                "two modes of one sampling vector fall into the same "
                "magnitude cluster; eigenvalue magnitudes may collide")
    return clusters, float(margin)


def _assign_clusters(clusters, supports, psis, coeff_mags, d: int):
    """Map each magnitude cluster to its global eigenvalue index.

    A cluster seen by patch set F can only be an index k with membership
    set P_k = F; when several indices share the same membership set the
    tie is broken by optimal assignment on the consistency of the implied
    |y_k| across patches.
    """
    membership = {k: frozenset(i for i, sup in enumerate(supports) if k in sup)
                  for k in range(d)}
    by_set_idx = collections.defaultdict(list)
    for k in range(d):
        by_set_idx[membership[k]].append(k)
    by_set_cluster = collections.defaultdict(list)
    for c_id, cluster in enumerate(clusters):
        by_set_cluster[frozenset(i for i, _, _ in cluster)].append(c_id)

    assignment = {}
    used_fallback = False
    for fset, cluster_ids in by_set_cluster.items():
        candidates = by_set_idx.get(fset, [])
        if len(candidates) != len(cluster_ids):
            raise PairingError(
                f"{len(cluster_ids)} magnitude clusters share patch set "
                f"{sorted(fset)} but {len(candidates)} indices have that "
                "membership; index separation failed")
        if len(candidates) == 1:
            assignment[cluster_ids[0]] = candidates[0]
            continue
        # ambiguous membership sets: pick the index assignment making the
        # implied |y_k| = |c_{i,p}| / |psi_{i,k}| most consistent per cluster
        used_fallback = True
        cost = np.empty((len(cluster_ids), len(candidates)))
        for a, c_id in enumerate(cluster_ids):
            for b, k in enumerate(candidates):
                est = np.array([coeff_mags[i][p] / np.abs(psis[i][k])
                                for i, p, _ in clusters[c_id]])
                cost[a, b] = est.std() / est.mean()
        rows, cols = scipy.optimize.linear_sum_assignment(cost)
        for a, b in zip(rows, cols):
            assignment[cluster_ids[a]] = candidates[b]
    return assignment, used_fallback


def _bfs_tree(supports, M: int):
    """Shortest-path spanning tree of the >=2-element overlap graph."""
    adj = collections.defaultdict(list)
    for i in range(M):
        for j in range(i + 1, M):
            shared = sorted(set(supports[i]) & set(supports[j]))
            if len(shared) >= 2:
                adj[i].append((j, shared))
                adj[j].append((i, shared))
    order = [(0, None, None)]
    seen = {0}
    queue = collections.deque([0])
    while queue:
        node = queue.popleft()
        for nxt, shared in adj[node]:
            if nxt not in seen:
                seen.add(nxt)
                order.append((nxt, node, shared))
                queue.append(nxt)
    if len(seen) != M:
        raise HypothesisError(
            "overlap graph is disconnected: phase propagation needs at "
            "least two shared eigenvalues between patch groups")
    return order


def _propagation_pair(parent_vals, shared):
    """Shared index pair whose relative phase best separates the windings."""
    best, best_margin = None, -1.0
    for a in range(len(shared)):
        for b in range(a + 1, len(shared)):
            delta = np.angle(parent_vals[shared[a]]) \
                - np.angle(parent_vals[shared[b]])
            margin = min(_circ_dist(2.0 * delta, 0.0), np.pi)
            if margin > best_margin:
                best, best_margin = (shared[a], shared[b]), margin
    return best


def recover_multi_vector(ensemble, S, support_map, *,
                         match_cap: float = MATCH_CAP,
                         ambiguity_factor: float = AMBIGUITY_FACTOR
                         ) -> RecoveryResult:
    """Recover all eigenvalues and the signal from localized sampling vectors.

    Needs the eigenvector basis S, the declared supports of
    psi_i = S^{-1} phi_i, and at least 2 w_i^2 + 1 samples per vector where
    w_i is the support size. Output is gauged largest-magnitude-real-positive
    in both the spectrum and y; both are determined up to one global phase
    each (winding is resolved whenever the sampling set allows it).
    """
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be a square matrix")
    d = S.shape[0]
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e14:
        raise IllConditionedError("eigenvector basis is numerically singular",
                                  condition=float(cond))
    M = ensemble.num_vectors
    if len(support_map) != M:
        raise ValueError(
            f"{M} sampling vectors but {len(support_map)} declared supports")
    supports = [tuple(sorted({int(k) for k in sup})) for sup in support_map]
    covered = set().union(*(set(s) for s in supports)) if supports else set()
    if covered != set(range(d)):
        raise HypothesisError(
            f"supports cover {sorted(covered)} instead of all of "
            f"0..{d - 1}: full-cover condition violated")
    psis = [np.linalg.solve(S, np.asarray(phi, dtype=complex))
            for phi in ensemble.phis]
    _check_supports(psis, supports, d)

    # stage 1: independent unordered recovery per patch
    patch_results = []
    for i in range(M):
        w = len(supports[i])
        patch_results.append(recover_unordered_spectrum(
            ensemble.samples[i], w, match_cap=match_cap,
            ambiguity_factor=ambiguity_factor,
            noise_level=float(ensemble.noise_level)))

    # stage 2: index separation through globally distinct magnitudes
    entries = [(i, p, float(np.abs(res.spectrum[p])))
               for i, res in enumerate(patch_results)
               for p in range(res.spectrum.size)]
    clusters, cluster_margin = _cluster_by_magnitude(entries, d)
    coeff_mags = []
    for res in patch_results:
        tab = res.table
        diag = np.array([tab.coeffs[tab.tau[(p, p)]]
                         for p in range(res.spectrum.size)])
        coeff_mags.append(np.sqrt(np.clip(np.real(diag), 0.0, None)))
    assignment, used_fallback = _assign_clusters(clusters, supports, psis,
                                                 coeff_mags, d)
    local_to_global = [dict() for _ in range(M)]
    global_to_local = [dict() for _ in range(M)]
    for c_id, cluster in enumerate(clusters):
        k = assignment[c_id]
        for i, p, _ in cluster:
            local_to_global[i][p] = k
            global_to_local[i][k] = p
    for i in range(M):
        if set(global_to_local[i]) != set(supports[i]):
            raise PairingError(
                f"vector {i}: recovered modes map onto "
                f"{sorted(global_to_local[i])} instead of {supports[i]}")

    # stage 3: breadth-first phase propagation from the anchor patch
    order = _bfs_tree(supports, M)
    flipped = [False] * M
    spec_by_patch = [None] * M          # aligned lambda estimates per patch
    prop_margins = []
    for node, parent, shared in order:
        raw = {k: patch_results[node].spectrum[global_to_local[node][k]]
               for k in supports[node]}
        if parent is None:
            spec_by_patch[node] = raw
            continue
        k1, k2 = _propagation_pair(spec_by_patch[parent], shared)
        delta_par = np.angle(spec_by_patch[parent][k1]) \
            - np.angle(spec_by_patch[parent][k2])
        delta_raw = np.angle(raw[k1]) - np.angle(raw[k2])
        d_keep = _circ_dist(delta_raw, delta_par)
        d_flip = _circ_dist(-delta_raw, delta_par)
        low, high = sorted((d_keep, d_flip))
        if high < ambiguity_factor * low:
            raise WindingError(
                f"phase propagation ambiguous between patches {parent} and "
                f"{node}: distances {d_keep:.3e} / {d_flip:.3e}")
        prop_margins.append(high - low)
        vals = raw
        if d_flip < d_keep:
            flipped[node] = True
            vals = {k: np.conj(v) for k, v in raw.items()}
        rot = _unit(sum(_unit(spec_by_patch[parent][k]) * _unit(np.conj(vals[k]))
                        for k in shared))
        spec_by_patch[node] = {k: rot * v for k, v in vals.items()}

    spectrum = np.zeros(d, dtype=complex)
    counts = np.zeros(d)
    for i in range(M):
        for k, v in spec_by_patch[i].items():
            spectrum[k] += v
            counts[k] += 1
    spectrum /= counts

    # stage 4: winding through the known psi products. This must precede
    # the y assembly: in the wrong conjugation orbit the per-patch y
    # estimates pick up patch-dependent phases 2 arg psi and do not stitch
    # into any global vector, so flipping afterwards cannot repair them.
    tables = [res.table.conjugated() if flipped[i] else res.table
              for i, res in enumerate(patch_results)]
    winding = "undetermined"
    winding_diag = {}
    best = None
    for k1 in range(d):
        for k2 in range(k1 + 1, d):
            holders = [i for i in range(M)
                       if k1 in global_to_local[i] and k2 in global_to_local[i]]
            for a in range(len(holders)):
                for b in range(a + 1, len(holders)):
                    i1, i2 = holders[a], holders[b]
                    g1 = psis[i1][k1] * np.conj(psis[i1][k2])
                    g2 = psis[i2][k1] * np.conj(psis[i2][k2])
                    det = g1.real * g2.imag - g1.imag * g2.real
                    quality = abs(det) / max(abs(g1) * abs(g2), 1e-300)
                    if best is None or quality > best[0]:
                        best = (quality, i1, i2, k1, k2, g1, g2)
    flip_tables = False
    if best is not None:
        quality, i1, i2, k1, k2, g1, g2 = best
        if quality <= WINDING_DET_TOL:
            raise WindingError(
                "winding system singular: all psi product pairs are "
                "parallel modulo pi")
        # the real parts of the coefficient products determine the product
        # y_k1 conj(y_k2) regardless of orbit; the imaginary parts then
        # tell the two orbits apart
        pair_coeffs = []
        for i in (i1, i2):
            tab = tables[i]
            p1 = global_to_local[i][k1]
            p2 = global_to_local[i][k2]
            pair_coeffs.append(tab.coeffs[tab.tau[(p1, p2)]])
        mat = np.array([[g1.real, g1.imag], [g2.real, g2.imag]])
        re_p, im_p = np.linalg.solve(mat, np.real(pair_coeffs))
        target = re_p + 1j * im_p
        model = [np.conj(target) * g1, np.conj(target) * g2]
        d_keep = max(abs(pair_coeffs[0] - model[0]),
                     abs(pair_coeffs[1] - model[1]))
        d_flip = max(abs(pair_coeffs[0] - np.conj(model[0])),
                     abs(pair_coeffs[1] - np.conj(model[1])))
        low, high = sorted((d_keep, d_flip))
        im_scale = max(abs(model[0].imag), abs(model[1].imag))
        winding_diag = {"indices": (i1, i2, k1, k2),
                        "system_quality": quality,
                        "distances": (d_keep, d_flip)}
        flip_tables = d_flip < d_keep
        if high >= ambiguity_factor * low and im_scale > 0:
            winding = "asRecovered"

    def _assemble_y(tabs):
        """Stitch per-patch y estimates along the tree; mean-pool shares."""
        y_by_patch = [None] * M
        stitch = 0.0
        for node, parent, _ in order:
            sup = supports[node]
            psi_local = np.array([psis[node][k] for k in sup])
            # table is indexed by local mode; reorder psi to match
            perm = [global_to_local[node][k] for k in sup]
            psi_by_mode = np.empty(len(sup), dtype=complex)
            psi_by_mode[perm] = psi_local
            y_local = factor_rank_one_products(tabs[node], psi_by_mode)
            est = {k: y_local[global_to_local[node][k]] for k in sup}
            if parent is not None:
                shared_any = sorted(set(sup) & set(supports[parent]))
                rot = _unit(sum(_unit(y_by_patch[parent][k])
                                * _unit(np.conj(est[k]))
                                for k in shared_any))
                est = {k: rot * v for k, v in est.items()}
                stitch = max(stitch,
                             max(abs(est[k] - y_by_patch[parent][k])
                                 for k in shared_any))
            y_by_patch[node] = est
        pooled = np.zeros(d, dtype=complex)
        y_counts = np.zeros(d)
        for i in range(M):
            for k, v in y_by_patch[i].items():
                pooled[k] += v
                y_counts[k] += 1
        return pooled / y_counts, stitch

    # stage 5: assemble y in the decided orbit; when the winding could not
    # be decided, keep whichever orbit stitches consistently
    if flip_tables:
        tables = [tab.conjugated() for tab in tables]
        spectrum = np.conj(spectrum)
    y, stitch = _assemble_y(tables)
    if winding == "undetermined" and M > 1:
        alt_tables = [tab.conjugated() for tab in tables]
        y_alt, stitch_alt = _assemble_y(alt_tables)
        if stitch_alt < stitch:
            tables = alt_tables
            spectrum = np.conj(spectrum)
            y, stitch = y_alt, stitch_alt
    winding_diag["stitch_residual"] = stitch

    # deterministic gauge: largest-magnitude entries real positive
    spec_rot = _unit(np.conj(spectrum[int(np.argmax(np.abs(spectrum)))]))
    spectrum = spec_rot * spectrum
    y_rot = _unit(np.conj(y[int(np.argmax(np.abs(y)))]))
    y = y_rot * y
    x = np.linalg.solve(S.conj().T, y)
    return RecoveryResult(
        spectrum=spectrum,
        signal=x,
        gauge={"convention": "largest-magnitude eigenvalue and y component "
                             "real positive; global phases undetermined",
               "winding": winding},
        diagnostics={"cluster_margin": cluster_margin,
                     "index_separation_fallback": used_fallback,
                     "propagation_margins": prop_margins,
                     "winding": winding_diag,
                     "patch_sigma_min": [r.diagnostics["sigma_min"]
                                         for r in patch_results],
                     "patch_residuals": [r.diagnostics["residual"]
                                         for r in patch_results]})
