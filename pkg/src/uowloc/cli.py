"""Command-line front end.

Subcommands: ``crlb`` (bound table), ``sweep`` (Monte Carlo RMSE vs bounds),
``scene`` (one labeled scenario for scatter plots), ``validate`` (oracle
suites).  Configuration is a flat JSON object with exact keys; unknown keys
are rejected.  Angles are accepted in degrees and wavelengths in nanometres
at this boundary only.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical
failure.

All CSV output uses '.' decimals, LF line endings, and a fixed
17-significant-digit float format, so identical config + seed reproduces
identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .channel import AttenuationMode, ChannelParams, FimWeighting, WaterType, water_preset
from .errors import ConfigError, ParseError, UowlocError, ValidationError
from .estimators import wlls_estimate
from .experiments import (
    Region,
    SweepSpec,
    SweptParameter,
    crlb_table,
    generate_scenario,
    run_sweep,
)
from .geometry import true_measurement
from .uncertainty import CovarianceVariant, NoiseModel, sample_measurement
from .validate import render_reports, run_all

OUTPUT_FORMAT_VERSION = "1"

EXIT_OK = 0
EXIT_VALIDATION_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

_KNOWN_KEYS = {
    "seed",
    "num_anchors",
    "region_side_m",
    "trials",
    "sigma_toa_m",
    "sigma_aoa_deg",
    "sigma_drift_m",
    "sigma_drift_x_m",
    "sigma_drift_y_m",
    "sigma_drift_z_m",
    "water_type",
    "extinction_coeff_per_m",
    "wavelength_nm",
    "divergence_deg",
    "transmit_power_w",
    "aperture_area_m2",
    "attenuation_mode",
    "fim_weighting",
    "covariance_variant",
    "apu_bound_model",
    "sweep",
}

_SWEEP_PARAMETERS = {
    "num_anchors": SweptParameter.NUM_ANCHORS,
    "range_error_std": SweptParameter.RANGE_ERROR_STD,
    "snr": SweptParameter.SNR,
    "anchor_drift_std": SweptParameter.ANCHOR_DRIFT_STD,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; every default is a benchmark-protocol value."""

    seed: int = 1
    num_anchors: int = 8
    region_side_m: float = 100.0
    trials: int = 1000
    sigma_toa_m: float = 2.0
    sigma_aoa_deg: float = 2.0
    sigma_drift_x_m: float = 1.5
    sigma_drift_y_m: float = 1.5
    sigma_drift_z_m: float = 1.5
    water_type: WaterType = WaterType.PURE_OCEAN
    extinction_coeff_per_m: float | None = None
    wavelength_nm: float = 445.0
    divergence_deg: float = 30.0
    transmit_power_w: float = 1.0
    aperture_area_m2: float = 0.01
    attenuation_mode: AttenuationMode = AttenuationMode.CONSTANT_EXPONENT
    fim_weighting: FimWeighting = FimWeighting.PAPER_PREFACTOR
    covariance_variant: CovarianceVariant = CovarianceVariant.PAPER_FORMULAS
    apu_bound_model: str = "drift_plus_measurement"
    sweep_parameter: SweptParameter = SweptParameter.NUM_ANCHORS
    sweep_values: tuple = (4.0, 5.0, 6.0, 7.0, 8.0)

    def extinction(self) -> float:
        return water_preset(self.water_type, self.extinction_coeff_per_m)

    def noise_model(self) -> NoiseModel:
        aoa = math.radians(self.sigma_aoa_deg)
        return NoiseModel(
            sigma_d=self.sigma_toa_m,
            sigma_phi=aoa,
            sigma_theta=aoa,
            sigma_dx=self.sigma_drift_x_m,
            sigma_dy=self.sigma_drift_y_m,
            sigma_dz=self.sigma_drift_z_m,
        )

    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            transmit_power=self.transmit_power_w,
            aperture_area=self.aperture_area_m2,
            trajectory_angle=0.0,
            divergence_angle=math.radians(self.divergence_deg),
            extinction_coeff=self.extinction(),
            attenuation_mode=self.attenuation_mode,
            fim_weighting=self.fim_weighting,
        )

    def region(self) -> Region:
        return Region.cube(self.region_side_m)

    def sweep_spec(self, threads: int = 1) -> SweepSpec:
        return SweepSpec(
            parameter=self.sweep_parameter,
            values=self.sweep_values,
            trials_per_point=self.trials,
            base_noise=self.noise_model(),
            channel=self.channel_params(),
            seed=self.seed,
            num_anchors=self.num_anchors,
            region=self.region(),
            cov_variant=self.covariance_variant,
            apu_includes_measurement_noise=self.apu_bound_model == "drift_plus_measurement",
            threads=threads,
        )


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise ValidationError(f"config key {key!r}: {message}")


def _as_number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"config key {key!r}: expected a number, got {value!r}")
    _require(math.isfinite(float(value)), key, "must be finite")
    return float(value)


def _as_nonneg(value, key: str) -> float:
    v = _as_number(value, key)
    _require(v >= 0.0, key, f"must be >= 0, got {v}")
    return v


def _as_positive_int(value, key: str) -> int:
    v = _as_number(value, key)
    _require(v == int(v) and v >= 1, key, f"must be an integer >= 1, got {value}")
    return int(v)


def _as_enum(value, key: str, mapping: dict):
    if value not in mapping:
        raise ValidationError(
            f"config key {key!r}: must be one of {sorted(mapping)}, got {value!r}"
        )
    return mapping[value]


def parse_config(text: str) -> RunConfig:
    """Strict parse of the flat JSON config document.

    Unknown keys, wrong types, and out-of-range values are errors; missing
    keys fall back to the benchmark defaults.
    """
    if not text.strip():
        raise ParseError("empty config document")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config is not valid JSON: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"config must be a JSON object, got {type(raw).__name__}")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ParseError(f"unknown config keys: {sorted(unknown)}")

    kwargs = {}
    if "seed" in raw:
        v = _as_number(raw["seed"], "seed")
        _require(v == int(v) and 0 <= v < 2**64, "seed", "must be an integer in [0, 2^64)")
        kwargs["seed"] = int(v)
    if "num_anchors" in raw:
        kwargs["num_anchors"] = _as_positive_int(raw["num_anchors"], "num_anchors")
    if "region_side_m" in raw:
        v = _as_number(raw["region_side_m"], "region_side_m")
        _require(v > 0.0, "region_side_m", f"must be > 0, got {v}")
        kwargs["region_side_m"] = v
    if "trials" in raw:
        kwargs["trials"] = _as_positive_int(raw["trials"], "trials")
    if "sigma_toa_m" in raw:
        kwargs["sigma_toa_m"] = _as_nonneg(raw["sigma_toa_m"], "sigma_toa_m")
    if "sigma_aoa_deg" in raw:
        kwargs["sigma_aoa_deg"] = _as_nonneg(raw["sigma_aoa_deg"], "sigma_aoa_deg")

    per_axis = {k for k in ("sigma_drift_x_m", "sigma_drift_y_m", "sigma_drift_z_m") if k in raw}
    if "sigma_drift_m" in raw and per_axis:
        raise ValidationError(
            "config key 'sigma_drift_m': give either the scalar or the per-axis keys, not both"
        )
    if "sigma_drift_m" in raw:
        v = _as_nonneg(raw["sigma_drift_m"], "sigma_drift_m")
        kwargs.update(sigma_drift_x_m=v, sigma_drift_y_m=v, sigma_drift_z_m=v)
    for key, attr in (
        ("sigma_drift_x_m", "sigma_drift_x_m"),
        ("sigma_drift_y_m", "sigma_drift_y_m"),
        ("sigma_drift_z_m", "sigma_drift_z_m"),
    ):
        if key in raw:
            kwargs[attr] = _as_nonneg(raw[key], key)

    if "water_type" in raw:
        kwargs["water_type"] = _as_enum(
            raw["water_type"],
            "water_type",
            {w.value: w for w in WaterType},
        )
    if "extinction_coeff_per_m" in raw:
        kwargs["extinction_coeff_per_m"] = _as_nonneg(
            raw["extinction_coeff_per_m"], "extinction_coeff_per_m"
        )
    if "wavelength_nm" in raw:
        v = _as_number(raw["wavelength_nm"], "wavelength_nm")
        _require(v > 0.0, "wavelength_nm", f"must be > 0, got {v}")
        kwargs["wavelength_nm"] = v
    if "divergence_deg" in raw:
        v = _as_number(raw["divergence_deg"], "divergence_deg")
        _require(0.0 < v < 180.0, "divergence_deg", f"must lie in (0, 180), got {v}")
        kwargs["divergence_deg"] = v
    if "transmit_power_w" in raw:
        kwargs["transmit_power_w"] = _as_nonneg(raw["transmit_power_w"], "transmit_power_w")
    if "aperture_area_m2" in raw:
        v = _as_number(raw["aperture_area_m2"], "aperture_area_m2")
        _require(v > 0.0, "aperture_area_m2", f"must be > 0, got {v}")
        kwargs["aperture_area_m2"] = v
    if "attenuation_mode" in raw:
        kwargs["attenuation_mode"] = _as_enum(
            raw["attenuation_mode"],
            "attenuation_mode",
            {m.value: m for m in AttenuationMode},
        )
    if "fim_weighting" in raw:
        kwargs["fim_weighting"] = _as_enum(
            raw["fim_weighting"],
            "fim_weighting",
            {m.value: m for m in FimWeighting},
        )
    if "covariance_variant" in raw:
        kwargs["covariance_variant"] = _as_enum(
            raw["covariance_variant"],
            "covariance_variant",
            {m.value: m for m in CovarianceVariant},
        )
    if "apu_bound_model" in raw:
        kwargs["apu_bound_model"] = _as_enum(
            raw["apu_bound_model"],
            "apu_bound_model",
            {"drift_plus_measurement": "drift_plus_measurement", "drift_only": "drift_only"},
        )
    if "sweep" in raw:
        sweep = raw["sweep"]
        if not isinstance(sweep, dict):
            raise ValidationError("config key 'sweep': must be an object")
        unknown_sweep = set(sweep) - {"parameter", "values"}
        if unknown_sweep:
            raise ParseError(f"unknown sweep keys: {sorted(unknown_sweep)}")
        if "parameter" not in sweep or "values" not in sweep:
            raise ValidationError("config key 'sweep': needs 'parameter' and 'values'")
        parameter = _as_enum(sweep["parameter"], "sweep.parameter", _SWEEP_PARAMETERS)
        values = sweep["values"]
        if not isinstance(values, list) or not values:
            raise ValidationError("config key 'sweep.values': must be a non-empty list")
        parsed_values = tuple(_as_number(v, "sweep.values") for v in values)
        if parameter is SweptParameter.NUM_ANCHORS:
            for v in parsed_values:
                _require(v == int(v) and v >= 1, "sweep.values",
                         f"anchor counts must be integers >= 1, got {v}")
        kwargs["sweep_parameter"] = parameter
        kwargs["sweep_values"] = parsed_values

    cfg = RunConfig(**kwargs)
    if cfg.water_type is not WaterType.CUSTOM and cfg.extinction_coeff_per_m is not None:
        raise ValidationError(
            "config key 'extinction_coeff_per_m': only valid with water_type='custom'"
        )
    if cfg.water_type is WaterType.CUSTOM and cfg.extinction_coeff_per_m is None:
        raise ValidationError(
            "config key 'extinction_coeff_per_m': required with water_type='custom'"
        )
    return cfg


def config_to_json(cfg: RunConfig) -> str:
    """Serialize a config so parse_config(config_to_json(cfg)) round-trips."""
    doc = {
        "seed": cfg.seed,
        "num_anchors": cfg.num_anchors,
        "region_side_m": cfg.region_side_m,
        "trials": cfg.trials,
        "sigma_toa_m": cfg.sigma_toa_m,
        "sigma_aoa_deg": cfg.sigma_aoa_deg,
        "sigma_drift_x_m": cfg.sigma_drift_x_m,
        "sigma_drift_y_m": cfg.sigma_drift_y_m,
        "sigma_drift_z_m": cfg.sigma_drift_z_m,
        "water_type": cfg.water_type.value,
        "wavelength_nm": cfg.wavelength_nm,
        "divergence_deg": cfg.divergence_deg,
        "transmit_power_w": cfg.transmit_power_w,
        "aperture_area_m2": cfg.aperture_area_m2,
        "attenuation_mode": cfg.attenuation_mode.value,
        "fim_weighting": cfg.fim_weighting.value,
        "covariance_variant": cfg.covariance_variant.value,
        "apu_bound_model": cfg.apu_bound_model,
        "sweep": {
            "parameter": cfg.sweep_parameter.value,
            "values": list(cfg.sweep_values),
        },
    }
    if cfg.extinction_coeff_per_m is not None:
        doc["extinction_coeff_per_m"] = cfg.extinction_coeff_per_m
    return json.dumps(doc, indent=2, sort_keys=True)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _metadata_line(cfg: RunConfig) -> str:
    return (
        f"# uowloc output-version={OUTPUT_FORMAT_VERSION}"
        f" seed={cfg.seed}"
        f" wavelength_nm={_fmt(cfg.wavelength_nm)}"
        f" water_type={cfg.water_type.value}"
        f" extinction_per_m={_fmt(cfg.extinction())}"
    )


def _write_csv(path: str, cfg: RunConfig, header: str, rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(_metadata_line(cfg) + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def cmd_crlb(cfg: RunConfig, out_dir: str, threads: int) -> int:
    """Write crlb.csv: scenario-averaged per-coordinate bounds per anchor count."""
    if cfg.sweep_parameter is SweptParameter.NUM_ANCHORS:
        counts = [int(v) for v in cfg.sweep_values]
    else:
        counts = [cfg.num_anchors]
    rows = crlb_table(
        counts,
        cfg.trials,
        cfg.noise_model(),
        cfg.channel_params(),
        cfg.seed,
        region=cfg.region(),
        cov_variant=cfg.covariance_variant,
        apu_includes_measurement_noise=cfg.apu_bound_model == "drift_plus_measurement",
        threads=threads,
    )
    csv_rows = [
        [str(r.num_anchors), _fmt(r.var_x), _fmt(r.var_y), _fmt(r.var_z), _fmt(r.total), r.mode]
        for r in rows
    ]
    _write_csv(
        os.path.join(out_dir, "crlb.csv"),
        cfg,
        "num_anchors,crlb_x_m2,crlb_y_m2,crlb_z_m2,crlb_total_m2,mode",
        csv_rows,
    )
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out_dir: str, threads: int) -> int:
    """Write sweep.csv: estimator RMSEs and matching bounds per sweep value."""
    result = run_sweep(cfg.sweep_spec(threads))
    csv_rows = [
        [
            cfg.sweep_parameter.value,
            _fmt(p.value),
            _fmt(p.rmse_lls),
            _fmt(p.rmse_wlls),
            _fmt(p.rmse_lls_apu),
            _fmt(p.rmse_wlls_apu),
            _fmt(p.sqrt_crlb),
            _fmt(p.sqrt_crlb_apu),
            _fmt(p.stderr),
            str(p.trials),
        ]
        for p in result.points
    ]
    _write_csv(
        os.path.join(out_dir, "sweep.csv"),
        cfg,
        "param,value,rmse_lls_m,rmse_wlls_m,rmse_lls_apu_m,rmse_wlls_apu_m,"
        "sqrt_crlb_m,sqrt_crlb_apu_m,stderr_m,trials",
        csv_rows,
    )
    return EXIT_OK


def cmd_scene(cfg: RunConfig, out_dir: str) -> int:
    """Write scene.csv: one labeled scenario with both WLLS estimates."""
    noise = cfg.noise_model()
    rng = np.random.default_rng([cfg.seed, 0, 0])
    scenario = generate_scenario(cfg.num_anchors, cfg.region(), noise, rng)
    measurements = [
        sample_measurement(true_measurement(scenario.source, a), noise, rng)
        for a in scenario.anchors_true
    ]
    est_true = wlls_estimate(scenario.anchors_true, measurements, noise)
    est_apu = wlls_estimate(
        scenario.anchors_drifted, measurements, noise, use_anchor_uncertainty=True
    )

    rows = []
    for a in scenario.anchors_true:
        rows.append(["anchor_true", _fmt(a[0]), _fmt(a[1]), _fmt(a[2])])
    for a in scenario.anchors_drifted:
        rows.append(["anchor_drifted", _fmt(a[0]), _fmt(a[1]), _fmt(a[2])])
    s = scenario.source
    rows.append(["source_true", _fmt(s[0]), _fmt(s[1]), _fmt(s[2])])
    p = est_true.position
    rows.append(["estimate_true_anchors", _fmt(p[0]), _fmt(p[1]), _fmt(p[2])])
    p = est_apu.position
    rows.append(["estimate_drifted_anchors", _fmt(p[0]), _fmt(p[1]), _fmt(p[2])])
    _write_csv(os.path.join(out_dir, "scene.csv"), cfg, "role,x,y,z", rows)
    return EXIT_OK


def cmd_validate(fast: bool = False) -> int:
    reports = run_all(fast=fast)
    text, all_passed = render_reports(reports)
    print(text)
    print(f"backend: {backend.backend_name()}")
    return EXIT_OK if all_passed else EXIT_VALIDATION_FAILURE


def _load_config(path: str | None, seed_override: int | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read config {path!r}: {exc}") from exc
        cfg = parse_config(text)
    if seed_override is not None:
        if seed_override < 0:
            raise ValidationError("--seed must be >= 0")
        cfg = replace(cfg, seed=seed_override)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uowloc",
        description="CRLB and least-squares benchmarks for 3D ToA/AoA localization",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("crlb", "write crlb.csv (bound table over anchor counts)"),
        ("sweep", "write sweep.csv (Monte Carlo RMSE vs bounds)"),
        ("scene", "write scene.csv (one labeled scenario)"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=str, default=None, help="JSON config path")
        cmd.add_argument("--out", type=str, default=".", help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument(
            "--threads",
            type=int,
            default=os.cpu_count() or 1,
            help="worker threads; any value yields identical bytes",
        )
    val = sub.add_parser("validate", help="run every numerical oracle")
    val.add_argument("--fast", action="store_true", help="reduced sample budgets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(fast=args.fast)
        cfg = _load_config(args.config, args.seed)
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        os.makedirs(args.out, exist_ok=True)
        if args.command == "crlb":
            return cmd_crlb(cfg, args.out, args.threads)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.threads)
        if args.command == "scene":
            return cmd_scene(cfg, args.out)
        raise ValueError(f"unhandled command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except UowlocError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
