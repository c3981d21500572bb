"""Linear and weighted linear least-squares position estimators.

Joint ToA+AoA gives every anchor a full 3D fix (anchor + range * bearing),
so the stacked linear system is well posed even with a single anchor.  LLS
is the unweighted mean of the per-anchor fixes; WLLS weights each fix by
the inverse of its first-order covariance, evaluated at the measured (not
true) triple since an estimator has no access to truth.

Per-anchor contributions are accumulated in a canonical order (lexicographic
in anchor coordinates, then measurement values) so both estimators are
bit-for-bit invariant under permutations of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AllWeightsSingular, EmptyInput
from .geometry import MeasurementTriple, as_vec3, spherical_fix
from .linalg3 import CONDITION_LIMIT, cond3, inv3_sym
from .uncertainty import NoiseModel


@dataclass
class EstimateResult:
    """Point estimate plus the per-anchor evidence that produced it."""

    position: np.ndarray
    per_anchor_fixes: np.ndarray
    weights_used: np.ndarray | None = None
    condition_flag: bool = False
    fallback_count: int = 0


def _validated(anchors, measurements):
    if len(anchors) == 0:
        raise EmptyInput("at least one anchor is required")
    if len(anchors) != len(measurements):
        raise ValueError(
            f"anchor/measurement count mismatch: {len(anchors)} vs {len(measurements)}"
        )
    return np.array([as_vec3(a) for a in anchors])


def _canonical_order(anchors: np.ndarray, measurements) -> np.ndarray:
    # lexsort uses the last key as primary: order by x, y, z, then d, phi, theta.
    d = np.array([m.d for m in measurements])
    phi = np.array([m.phi for m in measurements])
    theta = np.array([m.theta for m in measurements])
    return np.lexsort((theta, phi, d, anchors[:, 2], anchors[:, 1], anchors[:, 0]))


def lls_estimate(anchors: Sequence, measurements: Sequence[MeasurementTriple]) -> EstimateResult:
    """Unweighted mean of the per-anchor spherical fixes.

    This is the exact least-squares solution of the stacked identity-design
    system position = fix_j + e_j.
    """
    arr = _validated(anchors, measurements)
    fixes = np.array([spherical_fix(a, m) for a, m in zip(arr, measurements)])
    order = _canonical_order(arr, measurements)
    total = np.zeros(3)
    for idx in order:
        total = total + fixes[idx]
    return EstimateResult(position=total / len(fixes), per_anchor_fixes=fixes)


def fix_covariance(
    anchor,
    m: MeasurementTriple,
    n: NoiseModel,
    use_anchor_uncertainty: bool = False,
) -> np.ndarray:
    """First-order covariance of a spherical fix.

    B diag(sigma_d^2, sigma_phi^2, sigma_theta^2) B^T where B is the
    Jacobian of d * (sin t cos p, sin t sin p, cos t) in (d, phi, theta),
    evaluated at the measured triple.  With ``use_anchor_uncertainty`` the
    per-axis drift variances are added on the diagonal.
    """
    as_vec3(anchor)  # validates shape/finiteness; covariance itself is anchor-free
    sp = math.sin(m.phi)
    cp = math.cos(m.phi)
    st = math.sin(m.theta)
    ct = math.cos(m.theta)
    b = np.array(
        [
            [st * cp, -m.d * st * sp, m.d * ct * cp],
            [st * sp, m.d * st * cp, m.d * ct * sp],
            [ct, 0.0, -m.d * st],
        ]
    )
    cov = (b * n.measurement_sigmas**2) @ b.T
    if use_anchor_uncertainty:
        cov = cov + np.diag(n.drift_sigmas**2)
    return cov


def _weight_for(cov: np.ndarray) -> tuple[np.ndarray, bool]:
    """Inverse covariance, or an isotropic fallback when ill-conditioned."""
    w = inv3_sym(cov)
    if cond3(cov, w) <= CONDITION_LIMIT:
        return w, False
    tr = float(np.trace(cov))
    if tr > 0.0 and math.isfinite(tr):
        return np.eye(3) * (3.0 / tr), True
    return np.eye(3), True


def wlls_estimate(
    anchors: Sequence,
    measurements: Sequence[MeasurementTriple],
    n: NoiseModel,
    use_anchor_uncertainty: bool = False,
) -> EstimateResult:
    """Covariance-weighted mean of the per-anchor spherical fixes.

    Anchors whose fix covariance fails the condition guard fall back to an
    isotropic weight with the same total variance instead of failing the
    whole estimate; fallbacks are counted and flagged.
    """
    arr = _validated(anchors, measurements)
    fixes = np.array([spherical_fix(a, m) for a, m in zip(arr, measurements)])
    weights = np.empty((len(arr), 3, 3))
    fallbacks = 0
    for j, m in enumerate(measurements):
        weights[j], fell_back = _weight_for(fix_covariance(arr[j], m, n, use_anchor_uncertainty))
        fallbacks += int(fell_back)

    order = _canonical_order(arr, measurements)
    w_sum = np.zeros((3, 3))
    rhs = np.zeros(3)
    for idx in order:
        w_sum = w_sum + weights[idx]
        rhs = rhs + weights[idx] @ fixes[idx]

    w_sum_inv = inv3_sym(w_sum)
    if cond3(w_sum, w_sum_inv) > CONDITION_LIMIT:
        raise AllWeightsSingular("summed weight matrix condition exceeds 1e12")
    return EstimateResult(
        position=w_sum_inv @ rhs,
        per_anchor_fixes=fixes,
        weights_used=weights,
        condition_flag=fallbacks > 0,
        fallback_count=fallbacks,
    )
