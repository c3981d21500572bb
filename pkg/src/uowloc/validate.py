"""Independent numerical oracles.

Each check here recomputes a quantity through a route that shares no code
with the implementation it certifies: central finite differences for the
gradients, Monte Carlo score covariance for the information matrix,
empirical covariance of sampled drifts for the closed-form covariance, and
numpy's general matrix inverse for the cofactor CRLB.  The CLI ``validate``
subcommand runs all of them at fixed seeds and reports measured deviations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, FimWeighting
from .crlb import crlb_from_fim, fim_known_anchors, measurement_gradient, min_eigenvalue_ratio
from .geometry import relative_coords, true_measurement, wrap_angle
from .uncertainty import CovarianceVariant, NoiseModel, drift_noise_map, uncertainty_covariance

DEG = math.pi / 180.0


@dataclass
class OracleReport:
    name: str
    passed: bool
    detail: str
    known_deviation: bool = False  # documented discrepancy, not a failure
    elapsed_s: float = 0.0


def _random_geometries(rng, count, span=60.0, min_d=1.0, min_d2=0.5):
    """Random non-degenerate source/anchor pairs."""
    out = []
    while len(out) < count:
        need = count - len(out)
        src = rng.uniform(-span, span, (need, 3))
        anc = rng.uniform(-span, span, (need, 3))
        rel = src - anc
        d2 = np.hypot(rel[:, 0], rel[:, 1])
        d = np.sqrt(np.sum(rel * rel, axis=1))
        keep = (d >= min_d) & (d2 >= min_d2)
        out.extend(zip(src[keep], anc[keep]))
    return out[:count]


def fd_gradient(source, anchor, rel_step=1e-5):
    """Central finite differences of (d, phi, theta); azimuth differences wrapped."""
    src = np.asarray(source, dtype=float)
    d0 = relative_coords(src, anchor).d
    h = rel_step * d0
    g = np.zeros((3, 3))
    for axis in range(3):
        plus = src.copy()
        plus[axis] += h
        minus = src.copy()
        minus[axis] -= h
        mp = true_measurement(plus, anchor)
        mm = true_measurement(minus, anchor)
        g[axis, 0] = (mp.d - mm.d) / (2.0 * h)
        g[axis, 1] = wrap_angle(mp.phi - mm.phi) / (2.0 * h)
        g[axis, 2] = (mp.theta - mm.theta) / (2.0 * h)
    return g


def check_gradient_oracle(count=10_000, seed=20_240, rtol=1e-6) -> OracleReport:
    """Analytic gradient vs central finite differences on random geometries.

    The comparison is relative to each measurement component's gradient
    scale (its column norm), which is tighter than entrywise-relative on
    the entries that happen to pass through zero.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for src, anc in _random_geometries(rng, count):
        r = relative_coords(src, anc)
        analytic = measurement_gradient(r)
        numeric = fd_gradient(src, anc)
        col_scale = np.maximum(np.max(np.abs(analytic), axis=0), 1e-30)
        dev = np.max(np.abs(numeric - analytic) / np.maximum(np.abs(analytic), col_scale))
        worst = max(worst, float(dev))
    elapsed = time.perf_counter() - start
    return OracleReport(
        name="gradient_finite_difference",
        passed=worst <= rtol,
        detail=f"max scaled deviation {worst:.3e} vs tol {rtol:.1e} on {count} geometries",
        elapsed_s=elapsed,
    )


def score_covariance(source, anchors, noise: NoiseModel, n_samples, rng) -> np.ndarray:
    """Monte Carlo estimate of E[(grad log p)(grad log p)^T] at the truth.

    Samples measurement noise from the Gaussian model and forms the score
    with the analytic gradients; its covariance estimates the information
    matrix without touching the closed-form sums.
    """
    sigmas = noise.measurement_sigmas
    score = np.zeros((n_samples, 3))
    for a in anchors:
        r = relative_coords(source, a)
        g = measurement_gradient(r)
        eta = rng.standard_normal((n_samples, 3)) * sigmas
        score += (eta / sigmas**2) @ g.T
    return (score.T @ score) / n_samples


def check_score_oracle(
    n_scenarios=20,
    n_samples=100_000,
    seed=20_241,
    rtol_diag=0.05,
    offdiag_tol=0.05,
) -> OracleReport:
    """Analytic known-anchor FIM vs Monte Carlo score covariance.

    Unit prefactor: the pure Gaussian likelihood yields prefactor-free
    information, so this is the mode the oracle can certify.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    noise = NoiseModel(sigma_d=2.0, sigma_phi=2.0 * DEG, sigma_theta=2.0 * DEG)
    ch = ChannelParams(fim_weighting=FimWeighting.UNIT_PREFACTOR)
    worst_diag = 0.0
    worst_off = 0.0
    for _ in range(n_scenarios):
        source = rng.uniform(0.0, 100.0, 3)
        anchors = rng.uniform(0.0, 100.0, (8, 3))
        while np.any(np.linalg.norm(anchors - source, axis=1) < 1.0):
            anchors = rng.uniform(0.0, 100.0, (8, 3))
        analytic = fim_known_anchors(source, anchors, noise, ch)
        empirical = score_covariance(source, anchors, noise, n_samples, rng)
        for k in range(3):
            worst_diag = max(
                worst_diag,
                abs(empirical[k, k] - analytic[k, k]) / analytic[k, k],
            )
            for q in range(k + 1, 3):
                scale = math.sqrt(analytic[k, k] * analytic[q, q])
                worst_off = max(worst_off, abs(empirical[k, q] - analytic[k, q]) / scale)
    elapsed = time.perf_counter() - start
    passed = worst_diag <= rtol_diag and worst_off <= offdiag_tol
    return OracleReport(
        name="score_covariance_fim",
        passed=passed,
        detail=(
            f"diag dev {worst_diag:.4f} vs {rtol_diag}, offdiag dev {worst_off:.4f} "
            f"vs {offdiag_tol} over {n_scenarios} scenarios x {n_samples} samples"
        ),
        elapsed_s=elapsed,
    )


def empirical_induced_covariance(r, m, noise: NoiseModel, n_samples, rng) -> np.ndarray:
    """Covariance of the induced noise over sampled drifts (the sampling oracle)."""
    drifts = rng.standard_normal((n_samples, 3)) * noise.drift_sigmas
    eta = drifts @ drift_noise_map(r, m).T
    return (eta.T @ eta) / n_samples


def check_covariance_oracle(
    n_geometries=10,
    n_samples=1_000_000,
    seed=20_242,
    rtol=0.02,
    entry_floor=1e-6,
) -> tuple[OracleReport, OracleReport]:
    """Derived-variant covariance vs sampling; printed-variant discrepancy report.

    Returns (derived_check, paper_discrepancy_report).  The second report
    is informational: the printed (1,2) entry differs from the sampled
    expectation by a sign on its sigma_dx^2 term, and the check confirms
    the implementation reproduces exactly that documented deviation.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    noise = NoiseModel(sigma_dx=1.5, sigma_dy=0.8, sigma_dz=2.0)
    worst = 0.0
    paper_dev = 0.0
    checked = 0
    for src, anc in _random_geometries(rng, n_geometries, span=50.0, min_d=5.0, min_d2=2.0):
        r = relative_coords(src, anc)
        m = true_measurement(src, anc)
        empirical = empirical_induced_covariance(r, m, noise, n_samples, rng)
        derived = uncertainty_covariance(r, m, noise, CovarianceVariant.DERIVED_FORMULAS).matrix
        paper = uncertainty_covariance(r, m, noise, CovarianceVariant.PAPER_FORMULAS).matrix
        mask = np.abs(derived) > entry_floor
        if np.any(mask):
            dev = np.max(np.abs(empirical[mask] - derived[mask]) / np.abs(derived[mask]))
            worst = max(worst, float(dev))
            checked += int(np.sum(mask))
        # The two variants share every entry except (1,2).
        denom = max(abs(derived[0, 1]), entry_floor)
        paper_dev = max(paper_dev, abs(paper[0, 1] - derived[0, 1]) / denom)
    elapsed = time.perf_counter() - start
    derived_report = OracleReport(
        name="covariance_sampling_derived",
        passed=worst <= rtol,
        detail=(
            f"max relative deviation {worst:.4f} vs {rtol} on {checked} entries "
            f"({n_geometries} geometries x {n_samples} drifts)"
        ),
        elapsed_s=elapsed,
    )
    paper_report = OracleReport(
        name="covariance_paper_c12_sign",
        passed=paper_dev > rtol,  # the discrepancy must be visible, not hidden
        detail=(
            "known paper discrepancy: printed (1,2) entry deviates from the sampled "
            f"expectation by {paper_dev:.3f} relative (sign of the sigma_dx^2 term)"
        ),
        known_deviation=True,
        elapsed_s=0.0,
    )
    return derived_report, paper_report


def random_spd_matrix(rng, cond_max=100.0) -> np.ndarray:
    """Well-conditioned random symmetric positive definite 3x3."""
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    eigs = rng.uniform(1.0, cond_max, 3)
    return (q * eigs) @ q.T


def check_cofactor_oracle(count=1000, seed=20_243, rtol=1e-10) -> OracleReport:
    """Cofactor CRLB extraction vs the diagonal of numpy's general inverse."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        j = random_spd_matrix(rng)
        res = crlb_from_fim(j)
        ref = np.diag(np.linalg.inv(j))
        got = np.array([res.var_x, res.var_y, res.var_z])
        worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
    elapsed = time.perf_counter() - start
    return OracleReport(
        name="cofactor_vs_general_inverse",
        passed=worst <= rtol,
        detail=f"max relative deviation {worst:.3e} vs {rtol:.1e} on {count} SPD matrices",
        elapsed_s=elapsed,
    )


def check_psd_fault_injection(seed=20_244) -> OracleReport:
    """The PSD oracle must flag the printed (3,3) element (missing square).

    With zt < 0 the unsquared range ratio drives the information matrix
    indefinite; a healthy detector reports a negative eigenvalue there and
    a clean one for the corrected form.
    """
    start = time.perf_counter()
    source = np.array([0.0, 0.0, -20.0])  # below every anchor => zt < 0
    rng = np.random.default_rng(seed)
    anchors = rng.uniform(5.0, 40.0, (4, 3))
    noise = NoiseModel(sigma_d=2.0, sigma_phi=2.0 * DEG, sigma_theta=2.0 * DEG)
    ch = ChannelParams(fim_weighting=FimWeighting.UNIT_PREFACTOR)
    corrupted = fim_known_anchors(source, anchors, noise, ch, paper_literal_j33=True)
    healthy = fim_known_anchors(source, anchors, noise, ch)
    flagged = min_eigenvalue_ratio(corrupted) < -1e-10
    clean = min_eigenvalue_ratio(healthy) >= -1e-10
    elapsed = time.perf_counter() - start
    return OracleReport(
        name="psd_fault_injection_j33",
        passed=flagged and clean,
        detail=(
            f"corrupted min-eig/trace {min_eigenvalue_ratio(corrupted):.3e} flagged={flagged}; "
            f"corrected min-eig/trace {min_eigenvalue_ratio(healthy):.3e} clean={clean}"
        ),
        elapsed_s=elapsed,
    )


def run_all(fast: bool = False) -> list[OracleReport]:
    """Every oracle at fixed seeds.  ``fast`` shrinks the sample budgets."""
    reports = [
        check_gradient_oracle(count=2000 if fast else 10_000),
        check_score_oracle(
            n_scenarios=3 if fast else 5,
            n_samples=50_000 if fast else 100_000,
        ),
    ]
    derived, paper = check_covariance_oracle(
        n_geometries=3 if fast else 6,
        n_samples=100_000 if fast else 300_000,
        rtol=0.04 if fast else 0.02,
    )
    reports.extend([derived, paper])
    reports.append(check_cofactor_oracle())
    reports.append(check_psd_fault_injection())
    return reports


def render_reports(reports: list[OracleReport]) -> tuple[str, bool]:
    lines = []
    all_passed = True
    for rep in reports:
        if rep.known_deviation:
            tag = "KNOWN-DEVIATION" if rep.passed else "FAIL"
        else:
            tag = "PASS" if rep.passed else "FAIL"
        all_passed &= rep.passed
        timing = f" [{rep.elapsed_s:.1f}s]" if rep.elapsed_s >= 0.05 else ""
        lines.append(f"{tag:>15}  {rep.name}: {rep.detail}{timing}")
    verdict = "all oracles passed" if all_passed else "ORACLE FAILURE"
    lines.append(verdict)
    return "\n".join(lines), all_passed
