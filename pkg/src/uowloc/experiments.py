"""Deterministic Monte Carlo harness.

Reproduces the benchmark protocol: random scenarios in a cubic region,
noisy ToA/AoA measurements from the true geometry, LLS/WLLS estimates with
known and drifted anchor positions, and RMSE aggregation against the
matching CRLBs over parameter sweeps.

Determinism contract: trial ``i`` of sweep point ``p`` draws from a child
stream seeded with (master seed, p, i), so results are byte-identical
across runs, thread counts, and growing trial budgets.  Trials execute
independently and are aggregated in trial-index order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import backend
from .channel import AttenuationMode, ChannelParams, FimWeighting, gain_factor
from .errors import EmptyInput, GenerationFailed
from .uncertainty import CovarianceVariant, NoiseModel

#: Minimum source-anchor separation enforced during generation, meters.
MIN_ANCHOR_DISTANCE = 0.5
_GENERATION_RETRIES = 100


class SweptParameter(str, Enum):
    NUM_ANCHORS = "num_anchors"
    RANGE_ERROR_STD = "range_error_std"
    SNR = "snr"
    ANCHOR_DRIFT_STD = "anchor_drift_std"


@dataclass(frozen=True)
class Region:
    """Axis-aligned box, meters."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("region must have positive extent on every axis")

    @staticmethod
    def cube(side: float) -> "Region":
        return Region(lo=(0.0, 0.0, 0.0), hi=(float(side), float(side), float(side)))

    def mean_square_distance(self) -> float:
        """E[d^2] between two points drawn iid uniform in the box.

        Per axis E[(u - v)^2] = L^2/6, so a side-L cube gives L^2/2.  This
        is the SNR-to-ranging-variance conversion scale.
        """
        return sum((h - l) ** 2 / 6.0 for l, h in zip(self.lo, self.hi))


@dataclass
class Scenario:
    """One trial's ground truth: source, anchors, and their drifted twins.

    The source and true anchors lie inside ``region``; drifted anchors are
    true positions plus unconstrained Gaussian drift and may leave the box
    (clamping them would truncate the drift model the bounds assume).
    """

    source: np.ndarray
    anchors_true: np.ndarray
    anchors_drifted: np.ndarray
    region: Region

    def __post_init__(self):
        if self.anchors_true.shape != self.anchors_drifted.shape:
            raise ValueError("true and drifted anchor arrays must have the same shape")


@dataclass(frozen=True)
class SweepSpec:
    """Everything a sweep needs for reproducible execution."""

    parameter: SweptParameter
    values: tuple
    trials_per_point: int
    base_noise: NoiseModel
    channel: ChannelParams
    seed: int
    num_anchors: int = 8
    region: Region = Region.cube(100.0)
    cov_variant: CovarianceVariant = CovarianceVariant.PAPER_FORMULAS
    #: Effective-covariance mode: the APU bound adds the measurement
    #: variances to each drift covariance.  Guarantees bound-APU >= bound.
    apu_includes_measurement_noise: bool = True
    threads: int = 1

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        if self.num_anchors < 1:
            raise ValueError("num_anchors must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class TrialRecord:
    """Squared position errors (m^2) of the four estimates for one trial."""

    sq_err_lls: float
    sq_err_wlls: float
    sq_err_lls_apu: float
    sq_err_wlls_apu: float
    ok: bool
    clamp_events: int = 0
    fallback_events: int = 0


@dataclass
class PointResult:
    value: float
    trials: int
    failed_trials: int
    rmse_lls: float
    rmse_wlls: float
    rmse_lls_apu: float
    rmse_wlls_apu: float
    sqrt_crlb: float
    sqrt_crlb_apu: float
    stderr: float  # delta-method standard error of the known-anchor WLLS RMSE
    stderr_all: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    sqrt_crlb_stderr: float = 0.0
    sqrt_crlb_apu_stderr: float = 0.0
    failed_bounds: int = 0
    clamp_events: int = 0
    fallback_events: int = 0


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list[PointResult] = field(default_factory=list)


def rmse(sq_errors: Sequence[float]) -> float:
    """Root mean square of a list of squared errors (m^2 -> m)."""
    arr = np.asarray(sq_errors, dtype=float)
    if arr.size == 0:
        raise EmptyInput("rmse needs at least one squared error")
    return math.sqrt(float(np.mean(arr)))


def rmse_stderr(sq_errors: Sequence[float]) -> float:
    """Delta-method standard error of the RMSE estimate.

    std(rmse) ~= std(sq)/ (2 * rmse * sqrt(n)); 0 for degenerate inputs.
    """
    arr = np.asarray(sq_errors, dtype=float)
    if arr.size < 2:
        return 0.0
    r = rmse(arr)
    if r == 0.0:
        return 0.0
    return float(np.std(arr, ddof=1)) / (2.0 * r * math.sqrt(arr.size))


def trial_rng(seed: int, point_index: int, trial_index: int) -> np.random.Generator:
    """Child stream for one trial; adding trials never perturbs existing ones."""
    return np.random.default_rng([seed, point_index, trial_index])


def generate_scenario(
    num_anchors: int,
    region: Region,
    n: NoiseModel,
    rng: np.random.Generator,
) -> Scenario:
    """Uniform source and anchors in the region, plus drifted anchor twins.

    Any anchor closer than MIN_ANCHOR_DISTANCE to the source is redrawn
    (at most 100 times) to guard downstream divisions by the range.
    """
    if num_anchors < 1:
        raise ValueError("num_anchors must be >= 1")
    lo = np.array(region.lo)
    hi = np.array(region.hi)
    source = rng.uniform(lo, hi)
    anchors = np.empty((num_anchors, 3))
    for j in range(num_anchors):
        for _ in range(_GENERATION_RETRIES):
            candidate = rng.uniform(lo, hi)
            if np.linalg.norm(candidate - source) >= MIN_ANCHOR_DISTANCE:
                anchors[j] = candidate
                break
        else:
            raise GenerationFailed(
                f"anchor {j}: no admissible position in {_GENERATION_RETRIES} draws"
            )
    drift = rng.standard_normal((num_anchors, 3)) * n.drift_sigmas
    return Scenario(source=source, anchors_true=anchors,
                    anchors_drifted=anchors + drift, region=region)


def run_trial(
    s: Scenario,
    n: NoiseModel,
    ch: ChannelParams,
    rng: np.random.Generator,
) -> TrialRecord:
    """One Monte Carlo trial.

    Noisy measurements derive from the true geometry; LLS and WLLS run once
    with the true anchors and once with the drifted anchors (the positions
    the system would actually know).  A failed trial is recorded with
    ok=False, never silently dropped.

    Routed through the same batch kernel as run_sweep (batch of one), so a
    single-trial sweep reproduces this record exactly.
    """
    num_anchors = s.anchors_true.shape[0]
    zdraws = rng.standard_normal((num_anchors, 3))
    sq, status, clamps, fallbacks = backend.kernels().trial_errors(
        s.source[None, :],
        np.ascontiguousarray(s.anchors_true[None, :, :]),
        np.ascontiguousarray(s.anchors_drifted[None, :, :]),
        zdraws[None, :, :],
        n.measurement_sigmas,
        n.drift_sigmas,
    )
    return TrialRecord(
        sq_err_lls=float(sq[0, 0]),
        sq_err_wlls=float(sq[0, 1]),
        sq_err_lls_apu=float(sq[0, 2]),
        sq_err_wlls_apu=float(sq[0, 3]),
        ok=status[0] == 0,
        clamp_events=int(clamps[0]),
        fallback_events=int(fallbacks[0]),
    )


def _point_noise_and_anchors(spec: SweepSpec, value) -> tuple[NoiseModel, int]:
    p = spec.parameter
    if p is SweptParameter.NUM_ANCHORS:
        m = int(value)
        if m != value or m < 1:
            raise ValueError(f"num_anchors sweep values must be integers >= 1, got {value}")
        return spec.base_noise, m
    if p is SweptParameter.RANGE_ERROR_STD:
        return spec.base_noise.with_sigma_d(float(value)), spec.num_anchors
    if p is SweptParameter.SNR:
        # SNR (dB) = mean squared distance over the ranging variance.
        sigma_d = math.sqrt(spec.region.mean_square_distance() / 10.0 ** (float(value) / 10.0))
        return spec.base_noise.with_sigma_d(sigma_d), spec.num_anchors
    if p is SweptParameter.ANCHOR_DRIFT_STD:
        return spec.base_noise.with_drift(float(value)), spec.num_anchors
    raise ValueError(f"unknown swept parameter {p!r}")


def _channel_kernel_args(ch: ChannelParams) -> tuple[bool, float, float, bool]:
    unit = ch.fim_weighting is FimWeighting.UNIT_PREFACTOR
    gain3 = 0.0 if unit else 3.0 * gain_factor(ch)
    distance_dep = ch.attenuation_mode is AttenuationMode.DISTANCE_DEPENDENT
    return unit, gain3, ch.extinction_coeff, distance_dep


def _build_point_arrays(spec, point_index, noise, num_anchors, lo_trial, hi_trial):
    count = hi_trial - lo_trial
    sources = np.empty((count, 3))
    anchors = np.empty((count, num_anchors, 3))
    drifted = np.empty((count, num_anchors, 3))
    zdraws = np.empty((count, num_anchors, 3))
    for i in range(count):
        rng = trial_rng(spec.seed, point_index, lo_trial + i)
        scenario = generate_scenario(num_anchors, spec.region, noise, rng)
        sources[i] = scenario.source
        anchors[i] = scenario.anchors_true
        drifted[i] = scenario.anchors_drifted
        zdraws[i] = rng.standard_normal((num_anchors, 3))
    return sources, anchors, drifted, zdraws


def _run_point(spec: SweepSpec, point_index: int, value) -> PointResult:
    noise, num_anchors = _point_noise_and_anchors(spec, value)
    kern = backend.kernels()
    trials = spec.trials_per_point

    sq_errors = np.empty((trials, 4))
    status = np.empty(trials, dtype=np.uint8)
    clamps = np.empty(trials, dtype=np.int64)
    fallbacks = np.empty(trials, dtype=np.int64)
    bound_rows = np.empty((trials, 2, 4))
    bound_status = np.empty((trials, 2), dtype=np.uint8)

    unit, gain3, extinction, distance_dep = _channel_kernel_args(spec.channel)
    paper_c12 = spec.cov_variant is CovarianceVariant.PAPER_FORMULAS

    def work(lo_trial: int, hi_trial: int) -> None:
        srcs, ancs, drifts, zs = _build_point_arrays(
            spec, point_index, noise, num_anchors, lo_trial, hi_trial
        )
        sl = slice(lo_trial, hi_trial)
        sq_errors[sl], status[sl], clamps[sl], fallbacks[sl] = kern.trial_errors(
            srcs, ancs, drifts, zs, noise.measurement_sigmas, noise.drift_sigmas
        )
        bound_rows[sl], bound_status[sl] = kern.bounds(
            srcs, ancs, noise.measurement_sigmas, noise.drift_sigmas,
            unit, gain3, extinction, distance_dep,
            paper_c12, spec.apu_includes_measurement_noise,
        )

    if spec.threads == 1 or trials < 2:
        work(0, trials)
    else:
        n_chunks = min(spec.threads, trials)
        edges = np.linspace(0, trials, n_chunks + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            futures = [pool.submit(work, int(a), int(b)) for a, b in zip(edges, edges[1:])]
            for f in futures:
                f.result()

    ok = status == 0
    n_ok = int(np.sum(ok))
    if n_ok == 0:
        raise EmptyInput(f"all {trials} trials failed at sweep value {value}")
    errs = sq_errors[ok]
    stderr_all = tuple(rmse_stderr(errs[:, k]) for k in range(4))

    known_ok = bound_status[:, 0] == 0
    apu_ok = bound_status[:, 1] == 0
    sqrt_crlb = math.sqrt(float(np.mean(bound_rows[known_ok, 0, 3]))) if np.any(known_ok) else math.nan
    sqrt_crlb_apu = math.sqrt(float(np.mean(bound_rows[apu_ok, 1, 3]))) if np.any(apu_ok) else math.nan
    crlb_se = rmse_stderr(bound_rows[known_ok, 0, 3]) if np.any(known_ok) else 0.0
    crlb_apu_se = rmse_stderr(bound_rows[apu_ok, 1, 3]) if np.any(apu_ok) else 0.0

    return PointResult(
        value=float(value),
        trials=trials,
        failed_trials=trials - n_ok,
        rmse_lls=rmse(errs[:, 0]),
        rmse_wlls=rmse(errs[:, 1]),
        rmse_lls_apu=rmse(errs[:, 2]),
        rmse_wlls_apu=rmse(errs[:, 3]),
        sqrt_crlb=sqrt_crlb,
        sqrt_crlb_apu=sqrt_crlb_apu,
        stderr=stderr_all[1],
        stderr_all=stderr_all,
        sqrt_crlb_stderr=crlb_se,
        sqrt_crlb_apu_stderr=crlb_apu_se,
        failed_bounds=int(np.sum(~known_ok) + np.sum(~apu_ok)),
        clamp_events=int(np.sum(clamps[ok])),
        fallback_events=int(np.sum(fallbacks[ok])),
    )


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Execute every sweep point; deterministic given the spec (incl. seed)."""
    result = SweepResult(spec=spec)
    for point_index, value in enumerate(spec.values):
        result.points.append(_run_point(spec, point_index, value))
    return result


@dataclass
class CrlbTableRow:
    num_anchors: int
    mode: str  # "known" | "apu"
    var_x: float
    var_y: float
    var_z: float
    total: float
    scenarios_used: int


def crlb_table(
    anchor_counts: Sequence[int],
    trials: int,
    noise: NoiseModel,
    ch: ChannelParams,
    seed: int,
    region: Region = Region.cube(100.0),
    cov_variant: CovarianceVariant = CovarianceVariant.PAPER_FORMULAS,
    apu_includes_measurement_noise: bool = True,
    threads: int = 1,
) -> list[CrlbTableRow]:
    """Scenario-averaged per-coordinate CRLBs for each anchor count.

    Two rows per count: the known-anchor bound and the
    anchor-position-uncertainty bound, averaged over ``trials`` random
    scenarios drawn from (seed, point, trial) child streams.
    """
    unit, gain3, extinction, distance_dep = _channel_kernel_args(ch)
    paper_c12 = cov_variant is CovarianceVariant.PAPER_FORMULAS
    kern = backend.kernels()
    rows: list[CrlbTableRow] = []
    for point_index, m in enumerate(anchor_counts):
        m = int(m)
        sources = np.empty((trials, 3))
        anchors = np.empty((trials, m, 3))

        def work(lo_trial: int, hi_trial: int) -> None:
            for i in range(lo_trial, hi_trial):
                rng = trial_rng(seed, point_index, i)
                scenario = generate_scenario(m, region, noise, rng)
                sources[i] = scenario.source
                anchors[i] = scenario.anchors_true

        if threads == 1 or trials < 2:
            work(0, trials)
        else:
            n_chunks = min(threads, trials)
            edges = np.linspace(0, trials, n_chunks + 1, dtype=int)
            with ThreadPoolExecutor(max_workers=n_chunks) as pool:
                for f in [pool.submit(work, int(a), int(b)) for a, b in zip(edges, edges[1:])]:
                    f.result()

        vals, mode_status = kern.bounds(
            sources, anchors, noise.measurement_sigmas, noise.drift_sigmas,
            unit, gain3, extinction, distance_dep,
            paper_c12, apu_includes_measurement_noise,
        )
        for row_idx, mode in ((0, "known"), (1, "apu")):
            ok = mode_status[:, row_idx] == 0
            if not np.any(ok):
                raise EmptyInput(f"all scenarios failed for {mode} bound at {m} anchors")
            mean = np.mean(vals[ok, row_idx, :], axis=0)
            rows.append(CrlbTableRow(
                num_anchors=m, mode=mode,
                var_x=float(mean[0]), var_y=float(mean[1]),
                var_z=float(mean[2]), total=float(mean[3]),
                scenarios_used=int(np.sum(ok)),
            ))
    return rows
