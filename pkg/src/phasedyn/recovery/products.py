"""Shared recovery machinery: product tables, rank-one factorization,
optimal assignment, and global-phase alignment."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from ..algebra import as_complex_vector
from ..errors import PairingError

# Default distance cap for assignments, relative to the target scale.
MATCH_CAP = 1e-4

# Relative tolerance for "nonnegative real" diagonal entries.
DIAG_TOL = 1e-6

WINDING_STATES = ("asRecovered", "conjugated", "undetermined")


class InconsistentTableError(PairingError):
    """A product table violated its rank-one structure."""


@dataclass
class ProductTable:
    """Recovered bases/coefficients with the index-pair map tau.

    tau maps a pair (j, k) to the flat position of the term estimating
    (lambda_j conj(lambda_k), c_j conj(c_k)); winding records whether the
    orientation of the complex entries is trusted.
    """

    bases: np.ndarray
    coeffs: np.ndarray
    tau: dict
    winding: str = "asRecovered"

    def __post_init__(self):
        self.bases = as_complex_vector(self.bases, "bases")
        self.coeffs = as_complex_vector(self.coeffs, "coeffs")
        if self.bases.size != self.coeffs.size:
            raise ValueError("bases and coeffs lengths differ")
        if self.winding not in WINDING_STATES:
            raise ValueError(f"winding must be one of {WINDING_STATES}")
        positions = list(self.tau.values())
        if len(set(positions)) != len(positions):
            raise ValueError("tau is not injective")
        if any(not 0 <= p < self.bases.size for p in positions):
            raise ValueError("tau maps outside the recovered index range")
        scale = float(np.abs(self.bases).max())
        for (j, k), pos in self.tau.items():
            if j == k and np.real(self.bases[pos]) < -DIAG_TOL * scale:
                raise InconsistentTableError(
                    f"diagonal entry ({j},{j}) has negative real part "
                    f"{np.real(self.bases[pos]):.3e}")

    def conjugated(self) -> "ProductTable":
        """The opposite-winding reading of the same table.

        Conjugating every entry while keeping tau swaps the roles of the
        (j, k) and (k, j) products.
        """
        flipped = {"asRecovered": "conjugated", "conjugated": "asRecovered",
                   "undetermined": "undetermined"}[self.winding]
        return ProductTable(bases=np.conj(self.bases),
                            coeffs=np.conj(self.coeffs),
                            tau=dict(self.tau), winding=flipped)


@dataclass
class RecoveryResult:
    """Spectrum and/or signal estimates plus gauge and diagnostic records.

    Reported errors are only meaningful after align_global_phase.
    """

    spectrum: np.ndarray | None = None
    signal: np.ndarray | None = None
    gauge: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    table: ProductTable | None = None


def result_to_json(result: RecoveryResult) -> str:
    """Structured-text serialization of a recovery result."""
    import json

    def enc(arr):
        if arr is None:
            return None
        a = np.atleast_1d(np.asarray(arr, dtype=complex))
        return [[float(v.real), float(v.imag)] for v in a]

    doc = {
        "spectrum": enc(result.spectrum),
        "signal": enc(result.signal),
        "gauge": result.gauge,
        "diagnostics": {k: (float(v) if np.isscalar(v) and np.isrealobj(np.asarray(v))
                            else str(v))
                        for k, v in result.diagnostics.items()},
    }
    if result.table is not None:
        doc["winding"] = result.table.winding
    return json.dumps(doc, indent=2)


def match_values(estimates, targets, cap_rel: float = MATCH_CAP) -> np.ndarray:
    """Optimal assignment of estimates to targets on |difference| cost.

    Returns perm with estimates[perm[t]] matched to targets[t]. Raises
    PairingError when any matched distance exceeds cap_rel times the target
    scale.
    """
    est = as_complex_vector(estimates, "estimates")
    tgt = as_complex_vector(targets, "targets")
    if est.size != tgt.size:
        raise PairingError(
            f"cannot match {est.size} estimates to {tgt.size} targets")
    cost = np.abs(est[np.newaxis, :] - tgt[:, np.newaxis])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    perm = np.empty(tgt.size, dtype=int)
    perm[rows] = cols
    dists = cost[rows, cols]
    scale = float(np.abs(tgt).max())
    worst = float(dists.max())
    if worst > cap_rel * max(scale, 1e-300):
        raise PairingError(
            f"assignment distance {worst:.3e} exceeds cap "
            f"{cap_rel:.1e} * {scale:.3e}")
    return perm


def factor_rank_one_products(table: ProductTable, psi) -> np.ndarray:
    """Recover y from estimated products c_j conj(c_k) with c = conj(y) psi.

    Magnitudes come from the diagonal entries, phases are spread from the
    largest-magnitude coefficient gauged real-positive; the result is y up to
    one unimodular factor.
    """
    psi_v = as_complex_vector(psi, "psi")
    d = psi_v.size
    missing = [j for j in range(d) if (j, j) not in table.tau]
    if missing:
        raise InconsistentTableError(f"diagonal entries missing for {missing}")
    psi_scale = max(1.0, float(np.abs(psi_v).max()))
    if np.any(np.abs(psi_v) <= 1e-12 * psi_scale):
        raise InconsistentTableError("psi has a vanishing component")
    vals = table.coeffs
    scale = float(np.abs(vals).max())
    diag = np.array([vals[table.tau[(j, j)]] for j in range(d)])
    if np.any(np.real(diag) < -DIAG_TOL * scale):
        raise InconsistentTableError("negative diagonal coefficient")
    mags = np.sqrt(np.clip(np.real(diag), 0.0, None))
    anchor = int(np.argmax(mags))
    c_est = np.empty(d, dtype=complex)
    c_est[anchor] = mags[anchor]
    for j in range(d):
        if j == anchor:
            continue
        key = (j, anchor)
        if key not in table.tau:
            raise InconsistentTableError(f"product entry {key} missing")
        c_est[j] = mags[j] * np.exp(1j * np.angle(vals[table.tau[key]]))
    return np.conj(c_est / psi_v)


def align_global_phase(estimate, truth,
                       winding_undetermined: bool = False):
    """Best unimodular alignment of estimate to truth.

    Multiplies the estimate by the phase of <estimate, truth> (the closed-form
    minimizer of the two-norm misfit); with winding_undetermined also tries
    the conjugated orbit. Returns (aligned, err_inf).
    """
    est = as_complex_vector(estimate, "estimate")
    tru = as_complex_vector(truth, "truth")
    if est.size != tru.size:
        raise ValueError("estimate and truth lengths differ")

    def _align(e):
        z = np.vdot(e, tru)
        if np.abs(z) == 0.0:
            factor = 1.0 + 0.0j
            for j in range(tru.size):
                if np.abs(tru[j]) > 0 and np.abs(e[j]) > 0:
                    factor = (tru[j] / np.abs(tru[j])) / (e[j] / np.abs(e[j]))
                    break
        else:
            factor = z / np.abs(z)
        aligned = factor * e
        return aligned, float(np.abs(aligned - tru).max())

    best = _align(est)
    if winding_undetermined:
        other = _align(np.conj(est))
        if other[1] < best[1]:
            best = other
    return best
