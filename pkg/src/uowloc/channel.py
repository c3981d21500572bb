"""Underwater optical channel factors.

The geometric/optical gain of an anchor-to-source link, the water
attenuation factor, ToA-to-distance conversion, and water-type presets.
The attenuation factor is exposed in two modes because the range-free form
(exp(-c) with no distance) makes attenuation independent of link length;
the Beer-Lambert form exp(-c*d) is the standard alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidChannel

#: In-water speed of light used for ToA ranging, m/s.
UNDERWATER_LIGHT_SPEED_M_S = 2.55e8

#: Extinction coefficients at 445 nm from standard water-type tables, 1/m.
#: Config values, never hard-coded into math kernels.
PURE_OCEAN_EXTINCTION = 0.056
TURBID_HARBOR_EXTINCTION = 2.17


class AttenuationMode(str, Enum):
    #: exp(-c), range-free (the default).
    CONSTANT_EXPONENT = "constant_exponent"
    #: exp(-c*d), Beer-Lambert.
    DISTANCE_DEPENDENT = "distance_dependent"


class FimWeighting(str, Enum):
    #: Each anchor's FIM term carries the 3 * k_j * mu prefactor.
    PAPER_PREFACTOR = "paper_prefactor"
    #: Prefactor 1; the pure Gaussian-likelihood information.  Required for
    #: the score-covariance and finite-difference oracles.
    UNIT_PREFACTOR = "unit_prefactor"


class WaterType(str, Enum):
    PURE_OCEAN = "pure_ocean"
    TURBID_HARBOR = "turbid_harbor"
    CUSTOM = "custom"


def water_preset(w: WaterType, custom_extinction: float | None = None) -> float:
    """Extinction coefficient (1/m) for a water type.

    CUSTOM passes ``custom_extinction`` through unchanged.
    """
    if w is WaterType.PURE_OCEAN:
        return PURE_OCEAN_EXTINCTION
    if w is WaterType.TURBID_HARBOR:
        return TURBID_HARBOR_EXTINCTION
    if custom_extinction is None:
        raise InvalidChannel("custom water type needs an extinction coefficient")
    if not (math.isfinite(custom_extinction) and custom_extinction >= 0.0):
        raise InvalidChannel(f"extinction coefficient must be >= 0, got {custom_extinction}")
    return float(custom_extinction)


@dataclass(frozen=True)
class ChannelParams:
    """Optical link parameters entering the information-weight prefactor.

    Defaults: 1 W transmit power, 100 cm^2 aperture, boresight trajectory,
    30 degree divergence, pure ocean water, range-free attenuation,
    prefactor-weighted information sums.
    """

    transmit_power: float = 1.0
    aperture_area: float = 0.01
    trajectory_angle: float = 0.0
    divergence_angle: float = math.pi / 6.0
    extinction_coeff: float = PURE_OCEAN_EXTINCTION
    attenuation_mode: AttenuationMode = AttenuationMode.CONSTANT_EXPONENT
    fim_weighting: FimWeighting = FimWeighting.PAPER_PREFACTOR

    def __post_init__(self):
        if not (math.isfinite(self.transmit_power) and self.transmit_power >= 0.0):
            raise InvalidChannel(f"transmit_power must be >= 0, got {self.transmit_power}")
        if not (math.isfinite(self.aperture_area) and self.aperture_area > 0.0):
            raise InvalidChannel(f"aperture_area must be > 0, got {self.aperture_area}")
        if not math.isfinite(self.trajectory_angle):
            raise InvalidChannel("trajectory_angle must be finite")
        if not (0.0 < self.divergence_angle < math.pi):
            raise InvalidChannel(
                f"divergence_angle must lie in (0, pi), got {self.divergence_angle}"
            )
        if not (math.isfinite(self.extinction_coeff) and self.extinction_coeff >= 0.0):
            raise InvalidChannel(f"extinction_coeff must be >= 0, got {self.extinction_coeff}")


def gain_factor(p: ChannelParams) -> float:
    """Geometric/optical link gain P*A*cos(trajectory) / (2*pi*(1 - cos(divergence)))."""
    denom = 2.0 * math.pi * (1.0 - math.cos(p.divergence_angle))
    if denom <= 0.0:
        raise InvalidChannel("divergence angle gives a zero gain denominator")
    return p.transmit_power * p.aperture_area * math.cos(p.trajectory_angle) / denom


def attenuation(p: ChannelParams, d: float = 0.0) -> float:
    """Water attenuation factor in (0, 1].

    CONSTANT_EXPONENT ignores ``d`` and returns exp(-c); DISTANCE_DEPENDENT
    returns the Beer-Lambert exp(-c*d).
    """
    if d < 0.0:
        raise ValueError(f"distance must be >= 0, got {d}")
    if p.attenuation_mode is AttenuationMode.CONSTANT_EXPONENT:
        return math.exp(-p.extinction_coeff)
    return math.exp(-p.extinction_coeff * d)


def toa_to_distance(t: float) -> float:
    """Distance (m) from a time of arrival (s) at the in-water light speed."""
    if t < 0.0:
        raise ValueError(f"time of arrival must be >= 0, got {t}")
    return UNDERWATER_LIGHT_SPEED_M_S * t
