"""Closed-form 3x3 linear algebra.

Every matrix this package inverts is 3x3, so inversion uses the adjugate
formula guarded by a Frobenius-norm condition estimate instead of an
iterative solver.  The symmetric variant mirrors its output exactly so
downstream symmetry invariants hold bit-for-bit.
"""

from __future__ import annotations

import math

import numpy as np

#: Inversion guard threshold shared by CRLB, covariance and estimator code.
CONDITION_LIMIT = 1e12


def det3(a: np.ndarray) -> float:
    return (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


def inv3(a: np.ndarray) -> np.ndarray:
    """Adjugate inverse. Returns non-finite entries for singular input."""
    det = det3(a)
    out = np.empty((3, 3))
    out[0, 0] = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    out[0, 1] = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    out[0, 2] = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    out[1, 0] = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    out[1, 1] = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    out[1, 2] = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    out[2, 0] = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    out[2, 1] = a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]
    out[2, 2] = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        out /= det
    return out


def inv3_sym(a: np.ndarray) -> np.ndarray:
    """Adjugate inverse of a symmetric matrix; output is exactly symmetric."""
    det = det3(a)
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]
    c02 = a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]
    c11 = a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
    c12 = a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]
    c22 = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    out = np.array([[c00, c01, c02], [c01, c11, c12], [c02, c12, c22]])
    with np.errstate(divide="ignore", invalid="ignore"):
        out /= det
    return out


def fro3(a: np.ndarray) -> float:
    return math.sqrt(float(np.sum(a * a)))


def cond3(a: np.ndarray, a_inv: np.ndarray | None = None) -> float:
    """Frobenius condition estimate ||A||_F * ||A^-1||_F (upper bounds cond_2).

    Returns inf for singular input.
    """
    if a_inv is None:
        a_inv = inv3(a)
    if not np.all(np.isfinite(a_inv)):
        return math.inf
    return fro3(a) * fro3(a_inv)
