"""Measurement-model synthesis for phaseless dynamical sampling.

Diagonalizable and circulant systems, the phaseless samples |<x, A^l phi>|^2,
noise injection, collision-freedom and low-pass predicates, and seeded
random-instance generators whose rejection thresholds quantify the theorems'
almost-sure hypotheses.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import as_complex_vector, build_vandermonde, dft, idft
from .errors import GenerationError
from .prony import ExponentialSum

# Default relative tolerance for the collision predicates.
DEFAULT_COLLISION_TOL = 1e-8

_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# systems


@dataclass
class DiagonalizableSystem:
    """A = S diag(lam) S^{-1} with invertible S and nonzero spectrum."""

    S: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=complex)
        self.lam = as_complex_vector(self.lam, "lam")
        if self.S.ndim != 2 or self.S.shape[0] != self.S.shape[1]:
            raise ValueError(f"S must be square, got shape {self.S.shape}")
        if self.S.shape[0] != self.lam.size:
            raise ValueError("S and lam dimensions disagree")
        if not np.all(np.isfinite(self.S)):
            raise ValueError("S contains non-finite entries")
        cond = np.linalg.cond(self.S)
        if not np.isfinite(cond) or cond > 1e14:
            raise ValueError(f"S is numerically singular (cond {cond:.3e})")
        if np.any(np.abs(self.lam) == 0.0):
            raise ValueError("all eigenvalues must be nonzero")

    @property
    def dimension(self) -> int:
        return self.lam.size

    def matrix(self) -> np.ndarray:
        """Dense A = S diag(lam) S^{-1}."""
        return self.S @ (self.lam[:, np.newaxis] * np.linalg.inv(self.S))


def fourier_eigenbasis(d: int) -> np.ndarray:
    """Eigenvector basis conj(F) of every circulant matrix, F = (e^{-2 pi i jk/d}).

    Then S^* = F (so y = S^* x is the DFT of x) and S^{-1} = F/d.
    """
    jk = np.outer(np.arange(d), np.arange(d))
    return np.exp(2j * np.pi * jk / d)


@dataclass
class CirculantSystem:
    """Circulant system Circ(a) x = a * x, diagonalized by the DFT.

    The spectrum is a_hat = dft(a); first matrix column is the kernel a.
    """

    a: np.ndarray
    a_hat: np.ndarray = field(init=False)

    def __post_init__(self):
        self.a = as_complex_vector(self.a, "a")
        self.a_hat = dft(self.a)
        if np.any(np.abs(self.a_hat) == 0.0):
            raise ValueError("kernel has a vanishing DFT coefficient "
                             "(zero eigenvalue)")

    @property
    def dimension(self) -> int:
        return self.a.size

    def as_diagonalizable(self) -> DiagonalizableSystem:
        return DiagonalizableSystem(S=fourier_eigenbasis(self.dimension),
                                    lam=self.a_hat)

    def matrix(self) -> np.ndarray:
        """Dense circulant matrix with entry (j, k) = a[(j - k) mod d]."""
        return scipy.linalg.circulant(self.a)


def _spectrum_of(system) -> np.ndarray:
    if isinstance(system, CirculantSystem):
        return system.a_hat
    return system.lam


def transform_coefficients(system, x, phi):
    """The transformed vectors y = S^* x, psi = S^{-1} phi and c = conj(y) psi.

    The samples satisfy <x, A^l phi> = sum_k c_k lam_k^l.
    """
    xv = as_complex_vector(x, "x")
    pv = as_complex_vector(phi, "phi")
    if isinstance(system, CirculantSystem):
        d = system.dimension
        if xv.size != d or pv.size != d:
            raise ValueError("vector dimensions disagree with the system")
        y = dft(xv)
        psi = dft(pv) / d
    else:
        d = system.dimension
        if xv.size != d or pv.size != d:
            raise ValueError("vector dimensions disagree with the system")
        y = system.S.conj().T @ xv
        psi = np.linalg.solve(system.S, pv)
    c = np.conj(y) * psi
    return y, psi, c


def measure(system, x, phi, L: int) -> np.ndarray:
    """Phaseless samples |<x, A^l phi>|^2 for l = 0..L-1.

    Computed through the diagonalization: |sum_k c_k lam_k^l|^2 with
    c_k = conj(y_k) psi_k. measure_direct provides the matrix-power route
    used as an oracle in tests.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    _, _, c = transform_coefficients(system, x, phi)
    lam = _spectrum_of(system)
    inner = build_vandermonde(lam, L) @ c
    return np.abs(inner) ** 2


def measure_direct(system, x, phi, L: int) -> np.ndarray:
    """Same samples via explicit matrix powers (test oracle)."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    xv = as_complex_vector(x, "x")
    v = as_complex_vector(phi, "phi").copy()
    A = system.matrix()
    if xv.size != A.shape[0] or v.size != A.shape[0]:
        raise ValueError("vector dimensions disagree with the system")
    out = np.empty(L)
    for ell in range(L):
        out[ell] = np.abs(np.vdot(xv, v)) ** 2
        v = A @ v
    return out


def phaseless_sum(system, x, phi) -> tuple[ExponentialSum, list[tuple[int, int]]]:
    """The d^2-term exponential sum underlying the phaseless samples.

    Bases lam_j conj(lam_k) and coefficients c_j conj(c_k), flattened
    row-major; also returns the (j, k) pair for each term. Only valid when
    the spectrum is collision-free and no coefficient vanishes.
    """
    _, _, c = transform_coefficients(system, x, phi)
    lam = _spectrum_of(system)
    d = lam.size
    bases = np.outer(lam, np.conj(lam)).ravel()
    coeffs = np.outer(c, np.conj(c)).ravel()
    pairs = [(j, k) for j in range(d) for k in range(d)]
    return ExponentialSum(eta=coeffs, beta=bases), pairs


# ---------------------------------------------------------------------------
# low-pass grouping


def lowpass_multiplicities(d: int) -> np.ndarray:
    """Frequency multiplicities gamma_k for k = 0..floor(d/2).

    gamma_0 = 1; gamma_k = 2 for 0 < k < d/2; gamma_{d/2} = 1 when d is even.
    """
    m = d // 2
    gam = np.full(m + 1, 2.0)
    gam[0] = 1.0
    if d % 2 == 0 and d >= 2:
        gam[m] = 1.0
    return gam


def lowpass_pairs(d: int) -> list[tuple[int, int]]:
    """Index pairs (j, k) with 0 <= k <= j <= floor(d/2), in peeling order."""
    m = d // 2
    return [(j, k) for j in range(m + 1) for k in range(j + 1)]


def lowpass_group_coefficients(x, phi, d: int) -> np.ndarray:
    """Grouped coefficients u_k = c_k + c_{-k} (u_0 = c_0; u_{d/2} = c_{d/2}).

    c_k = conj(x_hat_k) phi_hat_k / d; the samples of a circulant low-pass
    system obey |sum_{k=0}^{m} u_k a_hat_k^l|^2.
    """
    xv = as_complex_vector(x, "x")
    pv = as_complex_vector(phi, "phi")
    if xv.size != d or pv.size != d:
        raise ValueError("vector length disagrees with d")
    c = np.conj(dft(xv)) * dft(pv) / d
    m = d // 2
    u = np.empty(m + 1, dtype=complex)
    u[0] = c[0]
    for k in range(1, m + 1):
        if d % 2 == 0 and k == m:
            u[k] = c[k]
        else:
            u[k] = c[k] + c[d - k]
    return u


def lowpass_group_sum(system: CirculantSystem, x, phi) -> tuple[ExponentialSum,
                                                                list[tuple[int, int]]]:
    """Grouped exponential sum of a low-pass circulant measurement.

    Bases a_hat_j a_hat_k over pairs 0 <= k <= j <= m with coefficients
    |u_j|^2 on the diagonal and 2 Re[u_j conj(u_k)] off it; (m+1)(m+2)/2
    terms in total.
    """
    d = system.dimension
    ah = np.real(system.a_hat)
    u = lowpass_group_coefficients(x, phi, d)
    pairs = lowpass_pairs(d)
    bases = np.array([ah[j] * ah[k] for j, k in pairs], dtype=complex)
    coeffs = np.array([abs(u[j]) ** 2 if j == k else 2.0 * np.real(u[j] * np.conj(u[k]))
                       for j, k in pairs], dtype=complex)
    return ExponentialSum(eta=coeffs, beta=bases), pairs


# ---------------------------------------------------------------------------
# predicates


def _min_pairwise_gap(values: np.ndarray) -> float:
    if values.size < 2:
        return np.inf
    diff = np.abs(values[:, np.newaxis] - values[np.newaxis, :])
    np.fill_diagonal(diff, np.inf)
    return float(diff.min())


def is_collision_free(lam, tol: float = DEFAULT_COLLISION_TOL) -> bool:
    """True when all d^2 products lam_j conj(lam_k) are pairwise distinct."""
    arr = as_complex_vector(lam, "lam")
    products = np.outer(arr, np.conj(arr)).ravel()
    scale = float(np.abs(products).max())
    if scale == 0.0:
        return False
    return _min_pairwise_gap(products) > tol * scale


def is_absolutely_collision_free(lam, tol: float = DEFAULT_COLLISION_TOL) -> bool:
    """Collision-free and the products |lam_j||lam_k| (j > k) are distinct."""
    arr = as_complex_vector(lam, "lam")
    if not is_collision_free(arr, tol):
        return False
    mods = np.abs(arr)
    d = arr.size
    mag_products = np.array([mods[j] * mods[k]
                             for j in range(d) for k in range(j)])
    if mag_products.size < 2:
        return True
    scale = float(mag_products.max())
    return _min_pairwise_gap(mag_products.astype(complex)) > tol * scale


def is_lowpass_kernel(a_hat, tol: float = DEFAULT_COLLISION_TOL) -> bool:
    """True when a_hat is real, positive, even and strictly decreasing
    on 0..floor(d/2) (a strictly symmetrically decreasing spectrum)."""
    arr = as_complex_vector(a_hat, "a_hat")
    d = arr.size
    scale = float(np.abs(arr).max())
    if scale == 0.0 or np.abs(np.imag(arr)).max() > tol * scale:
        return False
    vals = np.real(arr)
    if np.any(vals <= tol * scale):
        return False
    for k in range(1, d):
        if abs(vals[k] - vals[d - k]) > tol * scale:
            return False
    m = d // 2
    for k in range(m):
        if vals[k] - vals[k + 1] <= tol * scale:
            return False
    return True


def is_frequency_collision_free(a_hat, tol: float = DEFAULT_COLLISION_TOL) -> bool:
    """True when the products a_hat_j a_hat_k, 0 <= k <= j <= floor(d/2),
    are pairwise distinct."""
    arr = as_complex_vector(a_hat, "a_hat")
    products = np.array([arr[j] * arr[k] for j, k in lowpass_pairs(arr.size)])
    scale = float(np.abs(products).max())
    if scale == 0.0:
        return False
    return _min_pairwise_gap(products) > tol * scale


# ---------------------------------------------------------------------------
# noise


def add_noise(h, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Additive noise with magnitude ~ U[0, eps] and phase ~ U(-pi, pi].

    Real input keeps a real channel: the real part of the complex draw is
    added, so ||h - h_noisy||_inf <= eps either way.
    """
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    arr = np.asarray(h)
    if eps == 0.0:
        return arr.copy()
    mag = rng.uniform(0.0, eps, arr.shape)
    phase = rng.uniform(-np.pi, np.pi, arr.shape)
    if np.isrealobj(arr):
        return arr + mag * np.cos(phase)
    return arr + mag * np.exp(1j * phase)


# ---------------------------------------------------------------------------
# ensembles and instances


@dataclass
class MeasurementEnsemble:
    """Per-sampling-vector phaseless sample sequences with noise metadata.

    Carries the sampling vectors themselves: every recovery theorem assumes
    they are known.
    """

    phis: list
    samples: list
    noise_level: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if len(self.phis) != len(self.samples):
            raise ValueError("one sample sequence per sampling vector required")
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")
        self.phis = [as_complex_vector(p, "phi") for p in self.phis]
        cleaned = []
        for i, s in enumerate(self.samples):
            arr = np.asarray(s, dtype=float)
            if arr.ndim != 1:
                raise ValueError("sample sequences must be one-dimensional")
            if np.any(arr < -self.noise_level - 1e-15):
                raise ValueError(
                    f"sample sequence {i} dips below -noise_level")
            cleaned.append(arr)
        self.samples = cleaned

    @property
    def num_vectors(self) -> int:
        return len(self.phis)

    def lengths(self) -> list[int]:
        return [s.size for s in self.samples]


INSTANCE_KINDS = ("generic-collision-free", "lowpass-real", "lowpass-complex",
                  "multi-vector")


@dataclass
class Instance:
    """A generated problem instance: system, signal, sampling vectors."""

    kind: str
    d: int
    seed: int
    system: object
    x: np.ndarray
    phis: list
    support_map: list | None = None
    rejections: int = 0


def make_ensemble(instance: Instance, L, noise_eps: float = 0.0,
                  noise_seed: int | None = None) -> MeasurementEnsemble:
    """Measure every sampling vector of an instance for L steps.

    L may be a single count or one count per vector. Noise is seeded
    independently of the instance seed.
    """
    n = len(instance.phis)
    lengths = [int(L)] * n if np.isscalar(L) else [int(v) for v in L]
    if len(lengths) != n:
        raise ValueError("need one sample count per sampling vector")
    rng = np.random.default_rng(noise_seed)
    samples = []
    for phi, Li in zip(instance.phis, lengths):
        h = measure(instance.system, instance.x, phi, Li)
        samples.append(add_noise(h, noise_eps, rng))
    return MeasurementEnsemble(phis=list(instance.phis), samples=samples,
                               noise_level=noise_eps, seed=noise_seed)


# ---------------------------------------------------------------------------
# generator internals


def _relative_gap(values: np.ndarray) -> float:
    scale = float(np.abs(values).max())
    if scale == 0.0:
        return 0.0
    return _min_pairwise_gap(values.astype(complex)) / scale


def _circ_dist(x: float) -> float:
    """Distance of x to 0 modulo 2 pi."""
    r = np.mod(x, _TWO_PI)
    return float(min(r, _TWO_PI - r))


def unordered_phase_margin(lam) -> float:
    """Runner-up margin of the two-candidate phase intersection.

    For the spectrum sorted by descending modulus, each k >= 2 is placed by
    intersecting candidate phases derived from the (0, k) and (1, k)
    products. The wrong pairings sit at circular distances
    2|th_k|, 2|th_1| and 2|th_k - th_1| from the correct one (angles relative
    to the largest eigenvalue); the margin is the minimum over k.
    """
    arr = as_complex_vector(lam, "lam")
    order = np.argsort(-np.abs(arr))
    sorted_lam = arr[order]
    th = np.angle(sorted_lam) - np.angle(sorted_lam[0])
    margin = _circ_dist(2.0 * th[1]) if arr.size >= 2 else np.inf
    for k in range(2, arr.size):
        margin = min(margin,
                     _circ_dist(2.0 * th[k]),
                     _circ_dist(2.0 * (th[k] - th[1])))
    return margin


def _draw_unit_annulus(rng, n, lo=0.5, hi=1.0):
    mags = rng.uniform(lo, hi, n)
    phases = rng.uniform(-np.pi, np.pi, n)
    return mags * np.exp(1j * phases)


def _unit_rows_det(phi_hats: np.ndarray) -> float:
    """Smallest relative determinant of the stacked 2-row systems."""
    r1 = phi_hats[0]
    r2 = phi_hats[1]
    det = np.real(r1) * np.imag(r2) - np.imag(r1) * np.real(r2)
    norms = np.abs(r1) * np.abs(r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(norms > 0, np.abs(det) / norms, 0.0)
    return float(rel.min()) if rel.size else np.inf


def _generate_generic(rng, d, opts):
    lam = _draw_unit_annulus(rng, d)
    products = np.outer(lam, np.conj(lam)).ravel()
    if _relative_gap(products) < opts["product_sep"]:
        return None
    mods = np.abs(lam)
    mag_products = np.array([mods[j] * mods[k]
                             for j in range(d) for k in range(j)])
    if mag_products.size >= 2 and _relative_gap(mag_products) < opts["magnitude_sep"]:
        return None
    if d >= 3 and unordered_phase_margin(lam) < opts["phase_margin"]:
        return None
    S = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    if d == 1:
        S = np.ones((1, 1), dtype=complex)
    if np.linalg.cond(S) > opts["cond_max"]:
        return None
    x = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) / np.sqrt(2)
    phi = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) / np.sqrt(2)
    system = DiagonalizableSystem(S=S, lam=lam)
    y, psi, c = transform_coefficients(system, x, phi)
    for vec in (y, psi, c):
        if np.abs(vec).min() < opts["min_component"] * np.abs(vec).max():
            return None
    c_products = np.outer(c, np.conj(c)).ravel()
    if _relative_gap(c_products) < opts["coefficient_sep"]:
        return None
    return system, x, [phi], None


def _draw_lowpass_spectrum(rng, d, opts):
    """Real positive even strictly decreasing spectrum, collision-free in
    frequency with a working margin."""
    m = d // 2
    vals = np.sort(rng.uniform(0.5, 1.0, m + 1))[::-1]
    if np.min(-np.diff(vals)) < opts["kernel_gap"]:
        return None
    products = np.array([vals[j] * vals[k] for j, k in lowpass_pairs(d)])
    if _relative_gap(products) < opts["frequency_sep"]:
        return None
    a_hat = np.empty(d)
    a_hat[:m + 1] = vals
    for k in range(m + 1, d):
        a_hat[k] = vals[d - k]
    return a_hat


def _generate_lowpass_real(rng, d, opts):
    a_hat = _draw_lowpass_spectrum(rng, d, opts)
    if a_hat is None:
        return None
    system = CirculantSystem(a=np.real(idft(a_hat)))
    x = rng.standard_normal(d)
    phis = [rng.standard_normal(d) for _ in range(2)]
    m = d // 2
    # grouped coefficients must all stay away from zero for both vectors
    for phi in phis:
        u = lowpass_group_coefficients(x, phi, d)
        r = np.real(u) / lowpass_multiplicities(d)
        if np.abs(r).min() < opts["coefficient_min"] * np.abs(r).max():
            return None
    phi_hats = np.array([dft(p) for p in phis])
    inner = phi_hats[:, 1:m + 1] if d % 2 == 1 else phi_hats[:, 1:m]
    if inner.shape[1] > 0 and _unit_rows_det(inner) < opts["det_min"]:
        return None
    if abs(phi_hats[0, 0]) < 1e-6 or abs(phi_hats[1, 0]) < 1e-6:
        return None
    if d % 2 == 0 and (abs(phi_hats[0, m]) < 1e-6 or abs(phi_hats[1, m]) < 1e-6):
        return None
    return system, x.astype(complex), [p.astype(complex) for p in phis], None


def _generate_lowpass_complex(rng, d, opts):
    a_hat = _draw_lowpass_spectrum(rng, d, opts)
    if a_hat is None:
        return None
    system = CirculantSystem(a=np.real(idft(a_hat)))
    x = (rng.standard_normal(d) + 1j * rng.standard_normal(d)) / np.sqrt(2)
    phis = [(rng.standard_normal(d) + 1j * rng.standard_normal(d)) / np.sqrt(2)
            for _ in range(4)]
    m = d // 2
    us = []
    for phi in phis:
        u = lowpass_group_coefficients(x, phi, d)
        us.append(u)
        scale = np.abs(u).max()
        if np.abs(u).min() < opts["coefficient_min"] * scale:
            return None
        # every grouped cross coefficient 2 Re[u_j conj(u_k)] must survive
        for j in range(m + 1):
            for k in range(j):
                if abs(np.real(u[j] * np.conj(u[k]))) < opts["coefficient_min"] * scale ** 2:
                    return None
    phi_hats = np.array([dft(p) for p in phis])
    if np.abs(phi_hats[:, 0]).min() < 1e-6:
        return None
    c0 = np.array([u[0] for u in us])
    # the per-frequency 4x4 real systems must be well conditioned
    top = m if d % 2 == 0 else m + 1
    for k in range(1, top):
        rows = []
        for i in range(4):
            w = c0[i] * np.conj(phi_hats[i, k]) / d
            wp = c0[i] * np.conj(phi_hats[i, (d - k) % d]) / d
            rows.append([np.real(w), -np.imag(w), np.real(wp), -np.imag(wp)])
        M = np.array(rows)
        if np.linalg.cond(M) > opts["cond4_max"]:
            return None
    if d % 2 == 0:
        if np.abs(phi_hats[:, m]).min() < 1e-6:
            return None
    return system, x, phis, None


def _sliding_supports(d: int, w: int) -> list[tuple[int, ...]]:
    return [tuple(range(i, i + w)) for i in range(d - w + 1)]


def _generate_multi_vector(rng, d, opts):
    w = opts["support_width"]
    if w < 2 or w > d:
        raise ValueError(f"support width must be in [2, d], got {w}")
    supports = _sliding_supports(d, w)
    # eigenvalue magnitudes on a jittered grid keep global pairwise gaps
    step = 0.5 / max(d - 1, 1)
    mags = 0.5 + step * (np.arange(d) + 0.3 * rng.uniform(-1, 1, d))
    mags = mags[rng.permutation(d)]
    lam = mags * np.exp(1j * rng.uniform(-np.pi, np.pi, d))
    x_hat = _draw_unit_annulus(rng, d)
    x = idft(x_hat)
    phis = []
    psi_rows = np.zeros((len(supports), d), dtype=complex)
    for i, sup in enumerate(supports):
        psi = np.zeros(d, dtype=complex)
        psi[list(sup)] = _draw_unit_annulus(rng, w)
        psi_rows[i] = psi
        phis.append(idft(psi * d))
    # per-patch hypotheses
    for sup in supports:
        sub = lam[list(sup)]
        products = np.outer(sub, np.conj(sub)).ravel()
        if _relative_gap(products) < opts["product_sep"]:
            return None
        mods = np.abs(sub)
        mag_products = np.array([mods[j] * mods[k]
                                 for j in range(w) for k in range(j)])
        if _relative_gap(mag_products) < opts["magnitude_sep"]:
            return None
        if w >= 3 and unordered_phase_margin(sub) < opts["phase_margin"]:
            return None
    # adjacent patches must share a pair with a usable relative phase
    y = x_hat  # S = conj(F) gives y = S^* x = dft(x)
    for i in range(len(supports) - 1):
        shared = sorted(set(supports[i]) & set(supports[i + 1]))
        if len(shared) < 2:
            return None
        best = 0.0
        for a in range(len(shared)):
            for b in range(a):
                ang = np.angle(lam[shared[a]] * np.conj(lam[shared[b]]))
                best = max(best, abs(np.sin(ang)))
        if best < opts["overlap_phase_min"]:
            return None
    # winding quadruple: some adjacent pair and shared (k1, k2) must give a
    # solvable 2x2 system with Im[y_k1 conj(y_k2)] bounded away from zero
    found = False
    for i in range(len(supports) - 1):
        shared = sorted(set(supports[i]) & set(supports[i + 1]))
        for a in range(len(shared)):
            for b in range(a):
                k1, k2 = shared[b], shared[a]
                prod = y[k1] * np.conj(y[k2])
                if abs(np.imag(prod)) < opts["winding_im_min"] * abs(prod):
                    continue
                g1 = psi_rows[i, k1] * np.conj(psi_rows[i, k2])
                g2 = psi_rows[i + 1, k1] * np.conj(psi_rows[i + 1, k2])
                det = np.real(g1) * np.imag(g2) - np.imag(g1) * np.real(g2)
                if abs(det) >= opts["winding_det_min"] * abs(g1) * abs(g2):
                    found = True
                    break
            if found:
                break
        if found:
            break
    if not found:
        return None
    a = idft(lam)  # spectrum lam is a_hat of the circulant kernel
    system = CirculantSystem(a=a)
    return system, x, phis, [tuple(s) for s in supports]


_GENERIC_DEFAULTS = {
    "product_sep": None,      # filled per d below
    "magnitude_sep": None,
    "coefficient_sep": None,
    "phase_margin": 0.05,
    "min_component": 0.1,
    "cond_max": 50.0,
}

_LOWPASS_DEFAULTS = {
    "kernel_gap": 0.03,
    "frequency_sep": 0.02,
    "coefficient_min": 0.05,
    "det_min": 0.1,
    "cond4_max": 300.0,
}

_MULTI_DEFAULTS = {
    "support_width": 4,
    "product_sep": 0.01,
    "magnitude_sep": 2e-3,
    "phase_margin": 0.02,
    "overlap_phase_min": 0.05,
    "winding_im_min": 0.05,
    "winding_det_min": 0.05,
    "budget": 10_000,
}


def random_instance(kind: str, d: int, seed: int, **options) -> Instance:
    """Rejection-sample an instance satisfying the relevant hypotheses.

    Deterministic given (kind, d, seed); raises GenerationError when the
    attempt budget (default 10000) is exhausted. Threshold options tighten or
    loosen the quantified hypothesis margins.
    """
    if kind not in INSTANCE_KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {INSTANCE_KINDS}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if kind != "generic-collision-free" and d < 2:
        raise ValueError(f"kind {kind!r} needs d >= 2, got {d}")
    budget = int(options.pop("budget", 10_000))
    if kind == "generic-collision-free":
        opts = dict(_GENERIC_DEFAULTS)
        opts["product_sep"] = 0.2 / d
        opts["magnitude_sep"] = 0.1 / d
        opts["coefficient_sep"] = 0.05 / d
        gen = _generate_generic
    elif kind in ("lowpass-real", "lowpass-complex"):
        opts = dict(_LOWPASS_DEFAULTS)
        gen = (_generate_lowpass_real if kind == "lowpass-real"
               else _generate_lowpass_complex)
    else:
        opts = dict(_MULTI_DEFAULTS)
        gen = _generate_multi_vector
    unknown = set(options) - set(opts)
    if unknown:
        raise ValueError(f"unknown options for kind {kind!r}: {sorted(unknown)}")
    opts.update(options)
    rng = np.random.default_rng(seed)
    for attempt in range(budget):
        drawn = gen(rng, d, opts)
        if drawn is not None:
            system, x, phis, support_map = drawn
            return Instance(kind=kind, d=d, seed=seed, system=system, x=x,
                            phis=phis, support_map=support_map,
                            rejections=attempt)
    raise GenerationError(
        f"exhausted {budget} attempts generating kind={kind!r}, d={d}, seed={seed}")


# ---------------------------------------------------------------------------
# serialization


def _encode_complex(arr) -> list:
    a = np.atleast_1d(np.asarray(arr, dtype=complex))
    return [[float(v.real), float(v.imag)] for v in a]


def _decode_complex(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs])


def instance_to_json(instance: Instance) -> str:
    """JSON text for an instance: kind, kernel or (S, spectrum), vectors, seed."""
    doc: dict = {
        "kind": instance.kind,
        "d": instance.d,
        "seed": instance.seed,
        "rejections": instance.rejections,
        "x": _encode_complex(instance.x),
        "phis": [_encode_complex(p) for p in instance.phis],
    }
    if isinstance(instance.system, CirculantSystem):
        doc["system"] = {"type": "circulant",
                         "kernel": _encode_complex(instance.system.a)}
    else:
        doc["system"] = {
            "type": "diagonalizable",
            "S": [_encode_complex(row) for row in instance.system.S],
            "spectrum": _encode_complex(instance.system.lam),
        }
    if instance.support_map is not None:
        doc["support_map"] = [list(s) for s in instance.support_map]
    return json.dumps(doc, indent=2)


def instance_from_json(text: str) -> Instance:
    doc = json.loads(text)
    sys_doc = doc["system"]
    if sys_doc["type"] == "circulant":
        system: object = CirculantSystem(a=_decode_complex(sys_doc["kernel"]))
    elif sys_doc["type"] == "diagonalizable":
        S = np.array([_decode_complex(row) for row in sys_doc["S"]])
        system = DiagonalizableSystem(S=S, lam=_decode_complex(sys_doc["spectrum"]))
    else:
        raise ValueError(f"unknown system type {sys_doc['type']!r}")
    support = doc.get("support_map")
    return Instance(
        kind=doc["kind"], d=int(doc["d"]), seed=int(doc["seed"]),
        system=system, x=_decode_complex(doc["x"]),
        phis=[_decode_complex(p) for p in doc["phis"]],
        support_map=None if support is None else [tuple(s) for s in support],
        rejections=int(doc.get("rejections", 0)),
    )
