"""Perturbation bounds for exponential-sum and phase retrieval recovery.

Closed-form calculators for the norm, residual, and propagation
inequalities that govern the pipelines' error behaviour, plus seeded Monte
Carlo checkers verifying that observed errors never exceed the bounds when
the stated preconditions hold. Checkers perturb each bound's native
variable (delta on bases, eps on coefficients or measurements) so every
inequality is exercised in isolation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .algebra import (ConditioningProfile, build_vandermonde,
                      conditioning_profile, invert_square_vandermonde,
                      vandermonde_condition_bound)
from .prony import ExponentialSum, build_hankel, evaluate, kernel_vector

_SQRT2 = float(np.sqrt(2.0))


# ---------------------------------------------------------------------------
# closed-form calculators


def hankel_error_norm_bound(eps: float, L: int, K: int) -> tuple[float, float]:
    """Spectral-norm bounds for a Hankel error matrix with entries <= eps.

    Returns (tight, loose) = (sqrt((L-K)(K+1)) eps, (L+1) eps / 2).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if K < 1 or L <= 2 * K:
        raise ValueError(f"need L > 2K >= 2, got L={L}, K={K}")
    tight = float(np.sqrt((L - K) * (K + 1))) * eps
    loose = (L + 1) * eps / 2.0
    return tight, loose


def coefficient_error_bound(eps: float, profile: ConditioningProfile) -> float:
    """Coefficient error from measurement noise eps with exact bases.

    pi / sigma^(K-1) * eps; requires a positive minimal separation.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if profile.size > 1 and not profile.sigma > 0:
        raise ValueError("bases with zero separation have no bound")
    return profile.pi / profile.separation_power() * eps


def coefficient_error_bound_perturbed_bases(eps: float, delta: float,
                                            profile: ConditioningProfile,
                                            L: int, K: int,
                                            h_inf: float) -> float:
    """Coefficient error when the fitted bases are themselves delta-off.

    (pi_{|b|+delta} / (sigma - 2 delta)^(K-1))
    * (sqrt(2) K L pi rho_{|b|+delta}^(L-1) / sigma^(K-1) * ||h||_inf * delta
       + eps); requires delta < sigma / 2.
    """
    if eps < 0 or delta < 0:
        raise ValueError("eps and delta must be nonnegative")
    if K != profile.size:
        raise ValueError(f"K = {K} disagrees with profile size {profile.size}")
    if not (profile.size == 1 or delta < profile.sigma / 2.0):
        raise ValueError(
            f"delta = {delta:.3e} must stay below sigma/2 = "
            f"{profile.sigma / 2.0:.3e}")
    if K == 1:
        shrunk_sep = 1.0
    else:
        shrunk_sep = (profile.sigma - 2.0 * delta) ** (K - 1)
    vander_shift = (_SQRT2 * K * L * profile.pi
                    * profile.rho_shifted(delta) ** (L - 1)
                    / profile.separation_power())
    return (profile.pi_shifted(delta) / shrunk_sep
            * (vander_shift * h_inf * delta + eps))


def weighted_kernel_residual_bound(profile: ConditioningProfile, L: int,
                                   sigma_tilde: float,
                                   error_norm: float) -> float:
    """Bound on sum |eta_k|^2 |P(beta_k)|^2 for the perturbed kernel
    polynomial: L (pi / sigma^(K-1))^2 (sigma_tilde + ||E||_2)^2."""
    if sigma_tilde < 0 or error_norm < 0:
        raise ValueError("sigma_tilde and error_norm must be nonnegative")
    factor = profile.pi / profile.separation_power()
    return L * factor ** 2 * (sigma_tilde + error_norm) ** 2


def kernel_residual_bound(profile: ConditioningProfile, L: int,
                          sigma_tilde: float, error_norm: float,
                          sigma_prev: float) -> float:
    """Bound on sum |P(beta_k)|^2: K L rho^(2L-2) (sigma_tilde + ||E||_2)^2
    / sigma_prev^2, with sigma_prev the smallest nonzero singular value of
    the exact Hankel matrix."""
    if sigma_tilde < 0 or error_norm < 0:
        raise ValueError("sigma_tilde and error_norm must be nonnegative")
    if not sigma_prev > 0:
        raise ValueError("sigma_prev must be positive")
    K = profile.size
    return (K * L * profile.rho ** (2 * L - 2)
            * (sigma_tilde + error_norm) ** 2 / sigma_prev ** 2)


def spectrum_magnitude_bound(delta: float,
                             lambda_abs: float) -> tuple[float, float]:
    """Per-eigenvalue magnitude error from a delta-perturbed diagonal
    product.

    Returns (bound, simplified) = (delta / (2 sqrt(|l|^2 - delta)),
    sqrt(2) delta / (2 |l|)); the simplified form is valid once
    delta <= |l|^2 / 2.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if not delta < lambda_abs ** 2:
        raise ValueError(
            f"delta = {delta:.3e} must stay below |lambda|^2 = "
            f"{lambda_abs ** 2:.3e}")
    bound = delta / (2.0 * np.sqrt(lambda_abs ** 2 - delta))
    simplified = _SQRT2 * delta / (2.0 * lambda_abs)
    return float(bound), float(simplified)


def spectrum_phase_bound(delta: float, lambda_k_abs: float,
                         lambda_j_abs: float) -> float:
    """Phase error of one propagated eigenvalue: 2 delta / (|l_k| |l_j|)."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if not delta < lambda_k_abs * lambda_j_abs:
        raise ValueError(
            f"delta = {delta:.3e} must stay below |l_k||l_j| = "
            f"{lambda_k_abs * lambda_j_abs:.3e}")
    return 2.0 * delta / (lambda_k_abs * lambda_j_abs)


def spectrum_total_bound(delta: float,
                         lambda_min_abs: float) -> tuple[float, float]:
    """Combined magnitude-and-phase spectrum error bound.

    Returns (general, simplified) with
    general = (2 sqrt(2) / m + 1 / (2 sqrt(m^2 - delta))) delta for
    m = min |lambda|; simplified = 5 sqrt(2) delta / (2 m) once
    delta <= m^2 / 2.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if not delta < lambda_min_abs ** 2:
        raise ValueError(
            f"delta = {delta:.3e} must stay below min|lambda|^2 = "
            f"{lambda_min_abs ** 2:.3e}")
    general = (2.0 * _SQRT2 / lambda_min_abs
               + 1.0 / (2.0 * np.sqrt(lambda_min_abs ** 2 - delta))) * delta
    simplified = 5.0 * _SQRT2 * delta / (2.0 * lambda_min_abs)
    return float(general), float(simplified)


def signal_error_bound(eps: float, y, psi,
                       s_inv_colsum_norm: float) -> tuple[float, float]:
    """Transformed-signal and signal error bounds from coefficient noise.

    Returns (y_bound, x_bound) with x_bound = y_bound * ||S^-1||_1, the
    maximum absolute column sum of S^-1.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    y_arr = np.abs(np.asarray(y, dtype=complex))
    psi_arr = np.abs(np.asarray(psi, dtype=complex))
    y_min, y_max = float(y_arr.min()), float(y_arr.max())
    psi_min, psi_max = float(psi_arr.min()), float(psi_arr.max())
    floor = y_min ** 2 * psi_min ** 2
    if not eps < floor:
        raise ValueError(
            f"eps = {eps:.3e} must stay below min|y|^2 min|psi|^2 = "
            f"{floor:.3e}")
    y_bound = (2.0 * _SQRT2 * y_max * psi_max / floor
               + 1.0 / (2.0 * psi_min * np.sqrt(floor - eps))) * eps
    return float(y_bound), float(y_bound * s_inv_colsum_norm)


def column_sum_norm(matrix) -> float:
    """Induced 1-norm: the maximum absolute column sum."""
    return float(np.abs(np.asarray(matrix)).sum(axis=0).max())


def multi_patch_phase_accumulation(rho: float, M: int) -> float:
    """Worst-case phase error after propagating across M partial spectra:
    (1 + 2 (M - 1)) rho."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    return (1.0 + 2.0 * (M - 1)) * rho


# ---------------------------------------------------------------------------
# report structures


@dataclass
class SensitivityReport:
    """Bound-versus-observed record for one perturbation trial."""

    eps: float
    delta: float
    bounds: dict = field(default_factory=dict)
    empirical: dict = field(default_factory=dict)
    preconditions_met: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = set(self.empirical) - set(self.bounds)
        if missing:
            raise ValueError(f"empirical entries without bounds: {missing}")
        for name in self.empirical:
            self.preconditions_met.setdefault(name, True)

    def add(self, name: str, bound: float, empirical: float,
            precondition_met: bool = True) -> None:
        self.bounds[name] = float(bound)
        self.empirical[name] = float(empirical)
        self.preconditions_met[name] = bool(precondition_met)

    def violations(self) -> dict:
        """Names with empirical > bound despite met preconditions."""
        out = {}
        for name, emp in self.empirical.items():
            if self.preconditions_met.get(name) and emp > self.bounds[name]:
                out[name] = emp / self.bounds[name] if self.bounds[name] > 0 \
                    else np.inf
        return out


@dataclass
class CheckSummary:
    """Aggregate of one inequality over a seeded trial batch."""

    name: str
    trials: int
    skipped: int
    violations: int
    max_ratio: float


def write_check_csv(summaries, path) -> None:
    """CSV table (name, trials, skipped, violations, max_ratio)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "trials", "skipped", "violations",
                         "max_ratio"])
        for s in summaries:
            writer.writerow([s.name, s.trials, s.skipped, s.violations,
                             f"{s.max_ratio:.6e}"])


# ---------------------------------------------------------------------------
# Monte Carlo checkers


def _disc(rng, radius: float) -> complex:
    """Uniform draw from the closed complex disc of the given radius."""
    r = radius * np.sqrt(rng.uniform())
    phi = rng.uniform(-np.pi, np.pi)
    return r * np.exp(1j * phi)


def _draw_sum(rng, K: int, min_sep: float = 0.15) -> ExponentialSum:
    for _ in range(1000):
        beta = (rng.uniform(0.5, 1.0, K)
                * np.exp(1j * rng.uniform(-np.pi, np.pi, K)))
        if K == 1 or conditioning_profile(beta).sigma >= min_sep:
            eta = (rng.uniform(0.125, 1.0, K)
                   * np.exp(1j * rng.uniform(-np.pi, np.pi, K)))
            return ExponentialSum(eta=eta, beta=beta)
    raise RuntimeError("could not draw separated bases")


def _prony_trial(rng, K: int) -> SensitivityReport:
    """One trial of every Hankel / Vandermonde / coefficient inequality."""
    s = _draw_sum(rng, K)
    profile = conditioning_profile(s.beta)
    L = int(rng.integers(2 * K + 1, 3 * K + 2))
    h = evaluate(s, L)
    h_inf = float(np.abs(h).max())
    eps = h_inf * 10.0 ** rng.uniform(-9.0, -5.0)
    noise = np.array([_disc(rng, eps) for _ in range(L)])

    report = SensitivityReport(eps=eps, delta=0.0)

    V = build_vandermonde(s.beta, L)
    rho_pow = profile.rho ** (L - 1)
    report.add("vandermonde-inf-norm",
               K * rho_pow, np.abs(V).sum(axis=1).max())
    report.add("vandermonde-one-norm",
               L * rho_pow, np.abs(V).sum(axis=0).max())
    inv = invert_square_vandermonde(s.beta)
    report.add("inverse-vandermonde-inf-norm",
               profile.pi / profile.separation_power(),
               np.abs(inv).sum(axis=1).max())
    report.add("vandermonde-condition",
               vandermonde_condition_bound(s.beta, L), np.linalg.cond(V))

    H = build_hankel(h, K)
    H_noisy = build_hankel(h + noise, K)
    E = build_hankel(noise, K)
    error_norm = float(np.linalg.norm(E.entries, 2))
    tight, loose = hankel_error_norm_bound(eps, L, K)
    report.add("hankel-error-spectral-norm", tight, error_norm)
    report.add("hankel-error-tight-vs-loose", loose, tight)
    sv_exact = np.linalg.svd(H.entries, compute_uv=False)
    sv_noisy = np.linalg.svd(H_noisy.entries, compute_uv=False)
    report.add("singular-value-perturbation", error_norm,
               np.abs(sv_exact - sv_noisy).max())

    gamma, sigma_tilde = kernel_vector(H_noisy)
    poly_at_beta = np.polynomial.polynomial.polyval(s.beta, gamma)
    sigma_prev = float(sv_exact[K - 1])
    residual_pre = sigma_prev >= 2.0 * error_norm
    report.add("weighted-kernel-residual",
               weighted_kernel_residual_bound(profile, L, sigma_tilde,
                                              error_norm),
               float(np.sum(np.abs(s.eta) ** 2 * np.abs(poly_at_beta) ** 2)),
               precondition_met=residual_pre)
    report.add("kernel-residual",
               kernel_residual_bound(profile, L, sigma_tilde, error_norm,
                                     sigma_prev),
               float(np.sum(np.abs(poly_at_beta) ** 2)),
               precondition_met=residual_pre)

    eta_noisy = np.linalg.lstsq(V, h + noise, rcond=None)[0]
    report.add("coefficient-true-bases",
               coefficient_error_bound(eps, profile),
               np.abs(eta_noisy - s.eta).max())

    if K == 1:
        delta = 0.1 * rng.uniform(0.05, 0.8)
    else:
        delta = profile.sigma / 2.0 * rng.uniform(0.05, 0.8)
    beta_pert = s.beta + np.array([_disc(rng, delta) for _ in range(K)])
    eta_pert = np.linalg.lstsq(build_vandermonde(beta_pert, L),
                               h + noise, rcond=None)[0]
    report.add("coefficient-perturbed-bases",
               coefficient_error_bound_perturbed_bases(eps, delta, profile,
                                                       L, K, h_inf),
               np.abs(eta_pert - s.eta).max())
    report.delta = delta
    return report


def _spectrum_trial(rng, d: int) -> SensitivityReport:
    """Magnitude / phase / whole-spectrum recovery versus product noise."""
    lam = (rng.uniform(0.5, 1.2, d)
           * np.exp(1j * rng.uniform(-np.pi, np.pi, d)))
    anchor = int(np.argmax(np.abs(lam)))
    lam = lam * np.exp(-1j * np.angle(lam[anchor]))   # anchor real positive
    products = np.outer(lam, np.conj(lam))
    lam_min = float(np.abs(lam).min())
    delta = lam_min ** 2 * rng.uniform(0.05, 0.9)
    noisy = products + np.array([[_disc(rng, delta) for _ in range(d)]
                                 for _ in range(d)])

    report = SensitivityReport(eps=0.0, delta=delta)
    j = int(rng.integers(d))
    mag_bound, mag_simple = spectrum_magnitude_bound(delta, abs(lam[j]))
    mag_emp = abs(np.sqrt(abs(noisy[j, j])) - abs(lam[j]))
    report.add("spectrum-magnitude", mag_bound, mag_emp)
    report.add("spectrum-magnitude-simplified", mag_simple, mag_emp,
               precondition_met=delta <= abs(lam[j]) ** 2 / 2.0)
    if d >= 2:
        k = int(rng.integers(d - 1))
        k = k if k < j else k + 1
        phase_emp = np.angle(noisy[j, k] / products[j, k])
        report.add("spectrum-phase",
                   spectrum_phase_bound(delta, abs(lam[k]), abs(lam[j])),
                   abs(phase_emp))

    mags = np.sqrt(np.abs(np.diag(noisy)))
    est = np.empty(d, dtype=complex)
    for t in range(d):
        if t == anchor:
            est[t] = mags[t]
        else:
            est[t] = mags[t] * noisy[t, anchor] / abs(noisy[t, anchor])
    general, simplified = spectrum_total_bound(delta, lam_min)
    total_emp = float(np.abs(est - lam).max())
    anchor_stable = int(np.argmax(mags)) == anchor
    report.add("spectrum-total", general, total_emp,
               precondition_met=anchor_stable)
    report.add("spectrum-total-simplified", simplified, total_emp,
               precondition_met=anchor_stable and delta <= lam_min ** 2 / 2.0)
    return report


def _signal_trial(rng, d: int) -> SensitivityReport:
    """Transformed-signal recovery from perturbed coefficient products."""
    y = (rng.uniform(0.4, 1.2, d)
         * np.exp(1j * rng.uniform(-np.pi, np.pi, d)))
    psi = (rng.uniform(0.4, 1.2, d)
           * np.exp(1j * rng.uniform(-np.pi, np.pi, d)))
    c = np.conj(y) * psi
    anchor = int(np.argmax(np.abs(c)))
    y = y * np.exp(1j * np.angle(c[anchor]))          # makes c[anchor] real+
    c = np.conj(y) * psi
    products = np.outer(c, np.conj(c))
    floor = float(np.abs(y).min() ** 2 * np.abs(psi).min() ** 2)
    eps = floor * rng.uniform(0.05, 0.8)
    noisy = products + np.array([[_disc(rng, eps) for _ in range(d)]
                                 for _ in range(d)])

    report = SensitivityReport(eps=eps, delta=0.0)
    j = int(rng.integers(d))
    mod_bound = eps / (2.0 * abs(psi[j])
                       * np.sqrt(abs(y[j]) ** 2 * abs(psi[j]) ** 2 - eps))
    mod_emp = abs(np.sqrt(abs(noisy[j, j])) / abs(psi[j]) - abs(y[j]))
    report.add("signal-modulus", mod_bound, mod_emp,
               precondition_met=eps < abs(y[j]) ** 2 * abs(psi[j]) ** 2)
    if d >= 2:
        k = int(rng.integers(d - 1))
        k = k if k < j else k + 1
        phase_bound = 2.0 * eps / (abs(y[k]) * abs(y[j])
                                   * abs(psi[k]) * abs(psi[j]))
        phase_emp = abs(np.angle(noisy[j, k] / products[j, k]))
        report.add("signal-phase", phase_bound, phase_emp,
                   precondition_met=eps < abs(c[j]) * abs(c[k]))

    c_est = np.empty(d, dtype=complex)
    for t in range(d):
        if t == anchor:
            c_est[t] = np.sqrt(np.abs(noisy[t, t]))
        else:
            c_est[t] = np.sqrt(np.abs(noisy[t, t])) \
                * noisy[t, anchor] / abs(noisy[t, anchor])
    y_est = np.conj(c_est / psi)
    anchor_stable = int(np.argmax(np.abs(np.diag(noisy)))) == anchor

    while True:
        S = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        if np.linalg.cond(S) <= 50:
            break
    s_inv_norm = column_sum_norm(np.linalg.inv(S))
    y_bound, x_bound = signal_error_bound(eps, y, psi, s_inv_norm)
    report.add("signal-total-y", y_bound, float(np.abs(y_est - y).max()),
               precondition_met=anchor_stable)
    x_true = np.linalg.solve(S.conj().T, y)
    x_est = np.linalg.solve(S.conj().T, y_est)
    report.add("signal-total-x", x_bound, float(np.abs(x_est - x_true).max()),
               precondition_met=anchor_stable)
    return report


def _chain_trial(rng, M: int) -> SensitivityReport:
    """Phase propagation along a chain of M overlapping partial spectra."""
    rho = 10.0 ** rng.uniform(-4.0, -1.0)
    theta = rng.uniform(-np.pi, np.pi, M + 1)
    # patch i covers elements {i, i+1}; errors within rho per element
    err = rng.uniform(-rho, rho, (M, M + 1))
    # patch 0 phases are theta_j + err[0, j]; each subsequent patch is
    # shifted so it agrees with the running estimate on the shared element
    aligned = {0: theta[0] + err[0, 0], 1: theta[1] + err[0, 1]}
    for i in range(1, M):
        shift = aligned[i] - (theta[i] + err[i, i])
        aligned[i + 1] = theta[i + 1] + err[i, i + 1] + shift
    emp = abs(aligned[M] - theta[M])
    report = SensitivityReport(eps=0.0, delta=rho)
    report.add("multi-patch-accumulation",
               multi_patch_phase_accumulation(rho, M), emp)
    return report


def run_sensitivity_checks(trials: int = 1000, seed: int = 0, *,
                           max_order: int = 4) -> list[CheckSummary]:
    """Run every inequality checker over seeded trials and aggregate.

    Each trial draws its own perturbation sizes; violations are counted
    only when the inequality's preconditions hold.
    """
    rng = np.random.default_rng(seed)
    tally: dict = {}

    def _absorb(report: SensitivityReport) -> None:
        for name, emp in report.empirical.items():
            entry = tally.setdefault(name, {"trials": 0, "skipped": 0,
                                            "violations": 0, "ratio": 0.0})
            if not report.preconditions_met.get(name, True):
                entry["skipped"] += 1
                continue
            entry["trials"] += 1
            bound = report.bounds[name]
            ratio = emp / bound if bound > 0 else (0.0 if emp == 0 else np.inf)
            entry["ratio"] = max(entry["ratio"], ratio)
            if emp > bound:
                entry["violations"] += 1

    for t in range(trials):
        K = 1 + t % max_order
        d = 2 + t % (max_order - 1) if max_order >= 3 else 2
        M = 2 + t % 4
        _absorb(_prony_trial(rng, K))
        _absorb(_spectrum_trial(rng, d))
        _absorb(_signal_trial(rng, d))
        _absorb(_chain_trial(rng, M))
    return [CheckSummary(name=name, trials=v["trials"], skipped=v["skipped"],
                         violations=v["violations"], max_ratio=v["ratio"])
            for name, v in sorted(tally.items())]
