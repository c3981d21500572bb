"""Geometric measurement model.

Maps source/anchor positions to (distance, azimuth, elevation) triples and
back.  Azimuth is measured in the x-y plane from the x-axis with the
full-quadrant two-argument arctangent; elevation is measured from the +z
axis.  All angles are in radians; degrees exist only at the CLI boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry

TWO_PI = 2.0 * math.pi


def as_vec3(v) -> np.ndarray:
    """Coerce to a finite float64 3-vector."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector components must be finite")
    return arr


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi], congruent to ``a`` modulo 2*pi."""
    if not math.isfinite(a):
        raise ValueError("angle must be finite")
    w = math.fmod(a + math.pi, TWO_PI)
    if w <= 0.0:
        w += TWO_PI
    return w - math.pi


@dataclass(frozen=True)
class RelativeCoords:
    """Source-minus-anchor displacement with its full and horizontal ranges.

    d = sqrt(xt^2 + yt^2 + zt^2), d2 = sqrt(xt^2 + yt^2); d >= d2 >= 0.
    """

    xt: float
    yt: float
    zt: float
    d: float
    d2: float


@dataclass(frozen=True)
class MeasurementTriple:
    """One anchor's (distance, azimuth, elevation) measurement.

    ``azimuth_degenerate`` marks triples where the horizontal range was zero
    and the azimuth was set to 0 by convention; bound computations reject
    such geometries because the horizontal range appears in denominators.
    """

    d: float
    phi: float
    theta: float
    azimuth_degenerate: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.d) and math.isfinite(self.phi) and math.isfinite(self.theta)):
            raise ValueError("measurement components must be finite")
        if self.d < 0.0:
            raise ValueError(f"distance must be >= 0, got {self.d}")
        if not (-math.pi < self.phi <= math.pi):
            raise ValueError(f"azimuth must lie in (-pi, pi], got {self.phi}")
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"elevation must lie in [0, pi], got {self.theta}")


def relative_coords(source, anchor) -> RelativeCoords:
    """Displacement of ``source`` relative to ``anchor`` plus range terms.

    Coincident points (d = 0) are allowed here and rejected by the
    operations that would divide by d.
    """
    s = as_vec3(source)
    a = as_vec3(anchor)
    xt = s[0] - a[0]
    yt = s[1] - a[1]
    zt = s[2] - a[2]
    d2 = math.sqrt(xt * xt + yt * yt)
    d = math.sqrt(xt * xt + yt * yt + zt * zt)
    return RelativeCoords(xt=xt, yt=yt, zt=zt, d=d, d2=d2)


def true_measurement(source, anchor) -> MeasurementTriple:
    """Noise-free (d, phi, theta) for a source/anchor pair.

    Raises DegenerateGeometry for coincident points.  Directly above/below
    the anchor (horizontal range 0) the azimuth is undefined; it is set to 0
    and flagged via ``azimuth_degenerate``.
    """
    r = relative_coords(source, anchor)
    if r.d == 0.0:
        raise DegenerateGeometry("source and anchor coincide (d = 0)")
    # zt/d can exceed 1 by an ulp; clamp to keep acos defined.
    theta = math.acos(min(1.0, max(-1.0, r.zt / r.d)))
    if r.d2 == 0.0:
        return MeasurementTriple(d=r.d, phi=0.0, theta=theta, azimuth_degenerate=True)
    phi = math.atan2(r.yt, r.xt)
    if phi <= -math.pi:  # atan2(-0.0, x<0) returns -pi
        phi = math.pi
    return MeasurementTriple(d=r.d, phi=phi, theta=theta)


def direction(phi: float, theta: float) -> np.ndarray:
    """Unit vector (sin(theta)cos(phi), sin(theta)sin(phi), cos(theta))."""
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def spherical_fix(anchor, m: MeasurementTriple) -> np.ndarray:
    """Position implied by one anchor's measurement: anchor + d * u(phi, theta).

    Exact inverse of true_measurement for non-degenerate geometry.
    """
    a = as_vec3(anchor)
    return a + m.d * direction(m.phi, m.theta)
