"""CRLB and least-squares benchmarks for 3D ToA/AoA localization in
underwater optical wireless networks.

Library layout mirrors the processing chain: ``geometry`` (measurement
model), ``channel`` (optical link factors), ``uncertainty`` (noise and
anchor-drift propagation), ``crlb`` (information matrices and bounds),
``estimators`` (LLS/WLLS), ``experiments`` (seeded Monte Carlo harness),
``cli`` (CSV-emitting front end).  The hot batch kernels have a compiled
and a pure-numpy implementation selected at import; see ``backend``.
"""

from .backend import available_backends, backend_name
from .channel import (
    AttenuationMode,
    ChannelParams,
    FimWeighting,
    WaterType,
    attenuation,
    gain_factor,
    toa_to_distance,
    water_preset,
)
from .crlb import (
    CrlbResult,
    GradientVariant,
    crlb_from_fim,
    fim_known_anchors,
    fim_uncertain_anchors,
    measurement_gradient,
)
from .estimators import EstimateResult, fix_covariance, lls_estimate, wlls_estimate
from .experiments import (
    Region,
    Scenario,
    SweepResult,
    SweepSpec,
    SweptParameter,
    generate_scenario,
    rmse,
    run_sweep,
    run_trial,
)
from .geometry import (
    MeasurementTriple,
    RelativeCoords,
    relative_coords,
    spherical_fix,
    true_measurement,
    wrap_angle,
)
from .uncertainty import (
    CovarianceVariant,
    InducedNoise,
    NoiseModel,
    UncertaintyCovariance,
    induced_noise,
    sample_anchor_drift,
    sample_measurement,
    uncertainty_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "AttenuationMode",
    "ChannelParams",
    "CovarianceVariant",
    "CrlbResult",
    "EstimateResult",
    "FimWeighting",
    "GradientVariant",
    "InducedNoise",
    "MeasurementTriple",
    "NoiseModel",
    "Region",
    "RelativeCoords",
    "Scenario",
    "SweepResult",
    "SweepSpec",
    "SweptParameter",
    "UncertaintyCovariance",
    "WaterType",
    "attenuation",
    "available_backends",
    "backend_name",
    "crlb_from_fim",
    "fim_known_anchors",
    "fim_uncertain_anchors",
    "fix_covariance",
    "gain_factor",
    "generate_scenario",
    "induced_noise",
    "lls_estimate",
    "measurement_gradient",
    "relative_coords",
    "rmse",
    "run_sweep",
    "run_trial",
    "sample_anchor_drift",
    "sample_measurement",
    "spherical_fix",
    "toa_to_distance",
    "true_measurement",
    "uncertainty_covariance",
    "water_preset",
    "wlls_estimate",
    "wrap_angle",
]
