"""Noise models and anchor-drift error propagation.

Covers Gaussian measurement-noise sampling, per-axis Gaussian anchor drift,
the first-order noise a drift induces on a (d, phi, theta) measurement, and
the 3x3 covariance of that induced noise.

Two covariance variants ship.  PAPER_FORMULAS fills the entries exactly as
printed in the source derivation; DERIVED_FORMULAS is the direct
expectation E[v v^T] of the first-order noise terms under independent
zero-mean drift.  They differ only in the sign of the sigma_dx^2 term of
the (1,2) entry; the bound computations default to the printed form, while
the sampling oracle can only certify the derived form.  Neither is silently
"fixed" to match the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateGeometry
from .geometry import MeasurementTriple, RelativeCoords, wrap_angle


@dataclass(frozen=True)
class NoiseModel:
    """Measurement std-devs (m, rad, rad) and per-axis anchor-drift std-devs (m)."""

    sigma_d: float = 0.0
    sigma_phi: float = 0.0
    sigma_theta: float = 0.0
    sigma_dx: float = 0.0
    sigma_dy: float = 0.0
    sigma_dz: float = 0.0

    def __post_init__(self):
        for name in ("sigma_d", "sigma_phi", "sigma_theta", "sigma_dx", "sigma_dy", "sigma_dz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @property
    def measurement_sigmas(self) -> np.ndarray:
        return np.array([self.sigma_d, self.sigma_phi, self.sigma_theta])

    @property
    def drift_sigmas(self) -> np.ndarray:
        return np.array([self.sigma_dx, self.sigma_dy, self.sigma_dz])

    def with_drift(self, sigma: float) -> "NoiseModel":
        """Copy with isotropic per-axis drift ``sigma``."""
        return NoiseModel(self.sigma_d, self.sigma_phi, self.sigma_theta, sigma, sigma, sigma)

    def with_sigma_d(self, sigma: float) -> "NoiseModel":
        return NoiseModel(sigma, self.sigma_phi, self.sigma_theta,
                          self.sigma_dx, self.sigma_dy, self.sigma_dz)


class CovarianceVariant(str, Enum):
    PAPER_FORMULAS = "paper"
    DERIVED_FORMULAS = "derived"


@dataclass(frozen=True)
class InducedNoise:
    """First-order (d, phi, theta) perturbation caused by an anchor drift."""

    eta_d: float
    eta_phi: float
    eta_theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.eta_d, self.eta_phi, self.eta_theta])


@dataclass(frozen=True)
class UncertaintyCovariance:
    """3x3 covariance of the drift-induced measurement noise."""

    matrix: np.ndarray
    variant: CovarianceVariant


@dataclass
class ClampStats:
    """Counts of samples pushed back into the measurement domain.

    Heavy clamping (large sigma_theta near the poles, or sigma_d comparable
    to d) biases the Gaussian model, so samplers count rather than hide it.
    """

    d_clamped: int = 0
    theta_clamped: int = 0

    @property
    def total(self) -> int:
        return self.d_clamped + self.theta_clamped


def sample_measurement(
    true_m: MeasurementTriple,
    n: NoiseModel,
    rng: np.random.Generator,
    clamp_stats: ClampStats | None = None,
) -> MeasurementTriple:
    """Add independent zero-mean Gaussian noise to a measurement triple.

    Draw order is (d, phi, theta).  The noisy distance is clamped to >= 0,
    the azimuth wrapped to (-pi, pi], the elevation clamped to [0, pi];
    clamping events are counted in ``clamp_stats`` when given.
    """
    z = rng.standard_normal(3)
    d = true_m.d + n.sigma_d * z[0]
    if d < 0.0:
        d = 0.0
        if clamp_stats is not None:
            clamp_stats.d_clamped += 1
    phi = wrap_angle(true_m.phi + n.sigma_phi * z[1])
    theta = true_m.theta + n.sigma_theta * z[2]
    if theta < 0.0 or theta > math.pi:
        theta = min(math.pi, max(0.0, theta))
        if clamp_stats is not None:
            clamp_stats.theta_clamped += 1
    return MeasurementTriple(d=d, phi=phi, theta=theta,
                             azimuth_degenerate=true_m.azimuth_degenerate)


def sample_anchor_drift(n: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean Gaussian drift vector with independent per-axis std-devs."""
    return rng.standard_normal(3) * n.drift_sigmas


def _azimuth_denominator(r: RelativeCoords, m: MeasurementTriple) -> float:
    return math.cos(m.phi) * r.xt + math.sin(m.phi) * r.yt


def drift_noise_map(r: RelativeCoords, m: MeasurementTriple) -> np.ndarray:
    """Linear map A with (eta_d, eta_phi, eta_theta) = A @ (dx, dy, dz).

    Rows are the first-order sensitivities of the three measurement
    components to a drift of the anchor position.
    """
    if r.d == 0.0:
        raise DegenerateGeometry("coincident source and anchor")
    st = math.sin(m.theta)
    if st == 0.0:
        raise DegenerateGeometry("elevation at a pole (sin(theta) = 0)")
    denom = _azimuth_denominator(r, m)
    if denom == 0.0:
        raise DegenerateGeometry("azimuth denominator cos(phi)*xt + sin(phi)*yt = 0")
    return np.array(
        [
            [r.xt / r.d, r.yt / r.d, r.zt / r.d],
            [-math.sin(m.phi) / denom, math.cos(m.phi) / denom, 0.0],
            [0.0, 0.0, -1.0 / (r.d * st)],
        ]
    )


def induced_noise(r: RelativeCoords, m: MeasurementTriple, delta) -> InducedNoise:
    """First-order measurement perturbation for anchor drift ``delta``.

    Exactly linear in ``delta`` (it is a fixed matrix-vector product).
    """
    dv = np.asarray(delta, dtype=float)
    eta = drift_noise_map(r, m) @ dv
    return InducedNoise(eta_d=float(eta[0]), eta_phi=float(eta[1]), eta_theta=float(eta[2]))


def uncertainty_covariance(
    r: RelativeCoords,
    m: MeasurementTriple,
    n: NoiseModel,
    variant: CovarianceVariant = CovarianceVariant.PAPER_FORMULAS,
) -> UncertaintyCovariance:
    """Covariance of the drift-induced measurement noise for one anchor.

    Entries are closed forms in the relative geometry and the per-axis
    drift variances.  The two variants differ only in the sign of the
    sigma_dx^2 term of the (1,2) entry (see module docstring); the (2,3)
    entry is identically zero and the matrix is mirrored to be exactly
    symmetric.
    """
    if r.d == 0.0 or r.d2 == 0.0:
        raise DegenerateGeometry("covariance needs d > 0 and horizontal range > 0")
    st = math.sin(m.theta)
    if st == 0.0:
        raise DegenerateGeometry("elevation at a pole (sin(theta) = 0)")
    denom = _azimuth_denominator(r, m)
    if denom == 0.0:
        raise DegenerateGeometry("azimuth denominator cos(phi)*xt + sin(phi)*yt = 0")

    sx2 = n.sigma_dx * n.sigma_dx
    sy2 = n.sigma_dy * n.sigma_dy
    sz2 = n.sigma_dz * n.sigma_dz
    sp = math.sin(m.phi)
    cp = math.cos(m.phi)
    dsq = r.d * r.d

    c11 = (sx2 * r.xt * r.xt + sy2 * r.yt * r.yt + sz2 * r.zt * r.zt) / dsq
    x_sign = 1.0 if variant is CovarianceVariant.PAPER_FORMULAS else -1.0
    c12 = (x_sign * sp * sx2 * r.xt + cp * sy2 * r.yt) / (denom * r.d)
    c13 = -r.zt * sz2 / (st * dsq)
    c22 = (sp * sp * sx2 + cp * cp * sy2) / (denom * denom)
    c33 = sz2 / (st * r.d) ** 2
    mat = np.array([[c11, c12, c13], [c12, c22, 0.0], [c13, 0.0, c33]])
    return UncertaintyCovariance(matrix=mat, variant=variant)


def tan_perturbed_approx(phi: float, eta: float) -> float:
    """Small-angle approximation of tan(phi + eta)."""
    return (math.sin(phi) + eta * math.cos(phi)) / (math.cos(phi) - eta * math.sin(phi))


def cos_perturbed_approx(theta: float, eta: float) -> float:
    """Small-angle approximation of cos(theta + eta)."""
    return math.cos(theta) - eta * math.sin(theta)
