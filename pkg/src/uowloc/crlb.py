"""Fisher information and CRLB engine.

Closed-form information sums for known anchor positions, measurement
gradients, the uncertainty-aware information matrix built from per-anchor
drift covariances, and cofactor-based CRLB extraction.

Two printed-form discrepancies are handled explicitly rather than silently:

* The (3,3) information element is implemented with the squared range
  ratio (zt/sigma_d)^2.  The printed element carries zt/sigma_d unsquared,
  which drives the information matrix indefinite whenever zt < 0; the
  ``paper_literal_j33`` switch reproduces it for documentation and for the
  injected-fault check in the validation suite.
* The printed gradient table disagrees with direct differentiation of the
  measurement model in the sign of d(phi)/dy and d(theta)/dz.  The default
  gradient is the analytically correct one (certified against central
  finite differences); GradientVariant.PAPER_LITERAL reproduces the table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .channel import ChannelParams, FimWeighting, attenuation, gain_factor
from .errors import DegenerateGeometry, EmptyInput, InvalidNoise, SingularCovariance, SingularFim
from .geometry import RelativeCoords, relative_coords, true_measurement
from .linalg3 import CONDITION_LIMIT, cond3, det3, inv3_sym
from .uncertainty import CovarianceVariant, NoiseModel, uncertainty_covariance


class GradientVariant(str, Enum):
    ANALYTIC = "analytic"
    PAPER_LITERAL = "paper_literal"


@dataclass(frozen=True)
class CrlbResult:
    """Per-coordinate variance lower bounds (m^2) and their sum."""

    var_x: float
    var_y: float
    var_z: float
    total: float


def fim_prefactor(ch: ChannelParams, d: float) -> float:
    """Per-anchor information weight: 3 * k * mu(d), or 1 in unit mode."""
    if ch.fim_weighting is FimWeighting.UNIT_PREFACTOR:
        return 1.0
    return 3.0 * gain_factor(ch) * attenuation(ch, d)


def _check_scenario(source, anchors) -> list[RelativeCoords]:
    if len(anchors) == 0:
        raise EmptyInput("at least one anchor is required")
    rels = []
    for j, a in enumerate(anchors):
        r = relative_coords(source, a)
        if r.d == 0.0 or r.d2 == 0.0:
            raise DegenerateGeometry(
                f"anchor {j} is degenerate (d={r.d}, horizontal range={r.d2})"
            )
        rels.append(r)
    return rels


def fim_known_anchors(
    source,
    anchors: Sequence,
    n: NoiseModel,
    ch: ChannelParams,
    *,
    paper_literal_j33: bool = False,
) -> np.ndarray:
    """3x3 information matrix for the known-anchor measurement model.

    Sums the per-anchor closed forms; exactly symmetric by construction.
    Requires strictly positive measurement sigmas and non-degenerate
    geometry for every anchor.
    """
    if n.sigma_d <= 0.0 or n.sigma_phi <= 0.0 or n.sigma_theta <= 0.0:
        raise InvalidNoise("known-anchor information needs all measurement sigmas > 0")
    rels = _check_scenario(source, anchors)

    j11 = j12 = j13 = j22 = j23 = j33 = 0.0
    inv_sd2 = 1.0 / (n.sigma_d * n.sigma_d)
    inv_sp2 = 1.0 / (n.sigma_phi * n.sigma_phi)
    inv_st2 = 1.0 / (n.sigma_theta * n.sigma_theta)
    for r in rels:
        w = fim_prefactor(ch, r.d)
        dsq = r.d * r.d
        d2sq = r.d2 * r.d2
        j11 += w * (
            (r.xt * r.xt / dsq) * inv_sd2
            + (r.yt * r.yt / (d2sq * d2sq)) * inv_sp2
            + (r.xt * r.zt / (dsq * r.d2)) ** 2 * inv_st2
        )
        j12 += w * r.xt * r.yt * (
            inv_sd2 / dsq
            - inv_sp2 / (d2sq * d2sq)
            + (r.zt / (dsq * r.d2)) ** 2 * inv_st2
        )
        j13 += w * (r.xt * r.zt / dsq) * (inv_sd2 - inv_st2 / dsq)
        j22 += w * (
            (r.yt * r.yt / dsq) * inv_sd2
            + (r.xt * r.xt / (d2sq * d2sq)) * inv_sp2
            + (r.yt * r.zt / (dsq * r.d2)) ** 2 * inv_st2
        )
        j23 += w * (r.yt * r.zt / dsq) * (inv_sd2 - inv_st2 / dsq)
        if paper_literal_j33:
            # Printed form: zt/sigma_d enters unsquared.
            j33 += w * ((r.zt / n.sigma_d) + (r.d2 / r.d) ** 2 * inv_st2) / dsq
        else:
            j33 += w * ((r.zt * r.zt) * inv_sd2 + (r.d2 / r.d) ** 2 * inv_st2) / dsq
    return np.array([[j11, j12, j13], [j12, j22, j23], [j13, j23, j33]])


def measurement_gradient(
    r: RelativeCoords,
    variant: GradientVariant = GradientVariant.ANALYTIC,
) -> np.ndarray:
    """Gradient matrix of (d, phi, theta) with respect to the source position.

    Row a holds (dd/da, dphi/da, dtheta/da) for a in (x, y, z).
    """
    if r.d == 0.0 or r.d2 == 0.0:
        raise DegenerateGeometry("gradient needs d > 0 and horizontal range > 0")
    dsq = r.d * r.d
    d2sq = r.d2 * r.d2
    g = np.array(
        [
            [r.xt / r.d, -r.yt / d2sq, r.xt * r.zt / (dsq * r.d2)],
            [r.yt / r.d, r.xt / d2sq, r.yt * r.zt / (dsq * r.d2)],
            [r.zt / r.d, 0.0, -r.d2 / dsq],
        ]
    )
    if variant is GradientVariant.PAPER_LITERAL:
        g[1, 1] = -g[1, 1]
        g[2, 2] = -g[2, 2]
    return g


def fim_uncertain_anchors(
    source,
    anchors: Sequence,
    n: NoiseModel,
    ch: ChannelParams,
    cov_variant: CovarianceVariant = CovarianceVariant.PAPER_FORMULAS,
    *,
    include_measurement_noise: bool = False,
    gradient_variant: GradientVariant = GradientVariant.ANALYTIC,
) -> np.ndarray:
    """Information matrix under anchor position uncertainty.

    Per anchor: w * G C^-1 G^T with G the gradient matrix and C the
    drift-induced covariance.  ``include_measurement_noise`` adds
    diag(sigma_d^2, sigma_phi^2, sigma_theta^2) to each C so the bound
    degrades gracefully to the known-anchor bound as the drift vanishes;
    the default is the drift-only likelihood model.
    """
    rels = _check_scenario(source, anchors)
    meas_var = n.measurement_sigmas ** 2
    if include_measurement_noise and not np.all(meas_var > 0.0):
        raise InvalidNoise("effective covariance mode needs all measurement sigmas > 0")

    out = np.zeros((3, 3))
    for j, (r, a) in enumerate(zip(rels, anchors)):
        m = true_measurement(source, a)
        c = uncertainty_covariance(r, m, n, cov_variant).matrix
        if include_measurement_noise:
            c = c + np.diag(meas_var)
        c_inv = inv3_sym(c)
        if cond3(c, c_inv) > CONDITION_LIMIT:
            raise SingularCovariance(f"anchor {j}: drift covariance condition > 1e12")
        g = measurement_gradient(r, gradient_variant)
        w = fim_prefactor(ch, r.d)
        term = g @ c_inv @ g.T
        # Mirror the upper triangle so the sum stays exactly symmetric.
        out[0, 0] += w * term[0, 0]
        out[0, 1] += w * term[0, 1]
        out[0, 2] += w * term[0, 2]
        out[1, 1] += w * term[1, 1]
        out[1, 2] += w * term[1, 2]
        out[2, 2] += w * term[2, 2]
    out[1, 0] = out[0, 1]
    out[2, 0] = out[0, 2]
    out[2, 1] = out[1, 2]
    return out


def crlb_from_fim(j: np.ndarray) -> CrlbResult:
    """Per-coordinate CRLB via the cofactor ratios of the 3x3 information matrix.

    Equals the diagonal of the matrix inverse; raises SingularFim when the
    matrix fails the 1e12 condition guard.
    """
    j = np.asarray(j, dtype=float)
    if j.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got {j.shape}")
    det = det3(j)
    j_inv = inv3_sym(j)
    if det == 0.0 or cond3(j, j_inv) > CONDITION_LIMIT:
        raise SingularFim("information matrix condition exceeds 1e12")
    var_x = (j[1, 1] * j[2, 2] - j[1, 2] * j[1, 2]) / det
    var_y = (j[0, 0] * j[2, 2] - j[0, 2] * j[0, 2]) / det
    var_z = (j[0, 0] * j[1, 1] - j[0, 1] * j[0, 1]) / det
    return CrlbResult(var_x=var_x, var_y=var_y, var_z=var_z, total=var_x + var_y + var_z)


def min_eigenvalue_ratio(j: np.ndarray) -> float:
    """min eigenvalue / trace, used by PSD checks (>= -1e-10 passes)."""
    tr = float(np.trace(j))
    if tr == 0.0:
        return 0.0
    return float(np.linalg.eigvalsh(j)[0]) / tr
