import math

import numpy as np
import pytest

from uowloc.channel import ChannelParams, FimWeighting
from uowloc.crlb import (
    CrlbResult,
    GradientVariant,
    crlb_from_fim,
    fim_known_anchors,
    fim_prefactor,
    fim_uncertain_anchors,
    measurement_gradient,
    min_eigenvalue_ratio,
)
from uowloc.errors import DegenerateGeometry, EmptyInput, InvalidNoise, SingularFim
from uowloc.geometry import relative_coords
from uowloc.uncertainty import CovarianceVariant, NoiseModel
from uowloc.validate import fd_gradient, random_spd_matrix

UNIT_CH = ChannelParams(fim_weighting=FimWeighting.UNIT_PREFACTOR)
DEG = math.pi / 180.0


def random_scenario(rng, n_anchors=5, span=60.0, min_d=3.0, min_d2=1.5):
    while True:
        source = rng.uniform(-span, span, 3)
        anchors = rng.uniform(-span, span, (n_anchors, 3))
        rel = source - anchors
        d2 = np.hypot(rel[:, 0], rel[:, 1])
        d = np.sqrt(np.sum(rel * rel, axis=1))
        if np.all(d >= min_d) and np.all(d2 >= min_d2):
            return source, anchors


class TestFimKnownAnchors:
    def test_axis_aligned_single_anchor(self):
        n = NoiseModel(sigma_d=1.0, sigma_phi=1.0, sigma_theta=1.0)
        j = fim_known_anchors([10, 0, 0], [[0, 0, 0]], n, UNIT_CH)
        assert np.diag(j) == pytest.approx([1.0, 0.01, 0.01], rel=1e-14)
        off = j - np.diag(np.diag(j))
        assert np.all(off == 0.0)

    def test_mirror_symmetric_anchors_cancel_j12(self):
        # anchors mirrored across the x-axis: odd-in-y terms cancel
        n = NoiseModel(sigma_d=1.0, sigma_phi=0.1, sigma_theta=0.1)
        j = fim_known_anchors(
            [0, 0, 0], [[5, 4, 2], [5, -4, 2]], n, UNIT_CH
        )
        assert j[0, 1] == pytest.approx(0.0, abs=1e-15)

    def test_score_oracle_small(self):
        # light version of the acceptance criterion: analytic FIM vs the
        # Monte Carlo covariance of the likelihood score
        from uowloc.validate import score_covariance

        rng = np.random.default_rng(17)
        n = NoiseModel(sigma_d=2.0, sigma_phi=2 * DEG, sigma_theta=2 * DEG)
        source, anchors = random_scenario(rng, n_anchors=8)
        analytic = fim_known_anchors(source, anchors, n, UNIT_CH)
        empirical = score_covariance(source, anchors, n, 100_000, rng)
        assert np.diag(empirical) == pytest.approx(np.diag(analytic), rel=0.05)

    def test_gradient_identity(self):
        # closed forms == G^T diag(1/sigma^2) G summed over anchors, 1e-9
        rng = np.random.default_rng(23)
        n = NoiseModel(sigma_d=2.0, sigma_phi=0.03, sigma_theta=0.05)
        for _ in range(50):
            source, anchors = random_scenario(rng)
            analytic = fim_known_anchors(source, anchors, n, UNIT_CH)
            via_grad = np.zeros((3, 3))
            w = np.diag(1.0 / n.measurement_sigmas**2)
            for a in anchors:
                g = measurement_gradient(relative_coords(source, a))
                via_grad += g @ w @ g.T
            scale = np.max(np.abs(analytic))
            assert np.max(np.abs(analytic - via_grad)) <= 1e-9 * scale

    def test_prefactor_scales_information(self):
        rng = np.random.default_rng(2)
        source, anchors = random_scenario(rng)
        n = NoiseModel(sigma_d=2.0, sigma_phi=0.03, sigma_theta=0.05)
        ch = ChannelParams()  # paper prefactor, constant attenuation
        j_unit = fim_known_anchors(source, anchors, n, UNIT_CH)
        j_paper = fim_known_anchors(source, anchors, n, ch)
        w = fim_prefactor(ch, 1.0)  # distance-free in constant mode
        assert j_paper == pytest.approx(w * j_unit, rel=1e-12)

    def test_exactly_symmetric_and_psd(self):
        rng = np.random.default_rng(31)
        n = NoiseModel(sigma_d=1.5, sigma_phi=0.02, sigma_theta=0.04)
        for _ in range(25):
            source, anchors = random_scenario(rng)
            j = fim_known_anchors(source, anchors, n, UNIT_CH)
            assert np.array_equal(j, j.T)
            assert min_eigenvalue_ratio(j) >= -1e-10

    def test_paper_literal_j33_breaks_psd(self):
        # zt < 0 makes the printed (3,3) element negative: injected fault
        n = NoiseModel(sigma_d=2.0, sigma_phi=0.03, sigma_theta=0.03)
        source = [0.0, 0.0, -30.0]
        anchors = [[10.0, 5.0, 10.0], [-8.0, 12.0, 15.0], [5.0, -9.0, 12.0]]
        j_bad = fim_known_anchors(source, anchors, n, UNIT_CH, paper_literal_j33=True)
        assert min_eigenvalue_ratio(j_bad) < -1e-10

    def test_errors(self):
        n = NoiseModel(sigma_d=1.0, sigma_phi=1.0, sigma_theta=1.0)
        with pytest.raises(EmptyInput):
            fim_known_anchors([0, 0, 0], [], n, UNIT_CH)
        with pytest.raises(DegenerateGeometry):
            fim_known_anchors([0, 0, 10], [[0, 0, 0]], n, UNIT_CH)  # d2 = 0
        with pytest.raises(InvalidNoise):
            fim_known_anchors([10, 0, 0], [[0, 0, 0]], NoiseModel(sigma_d=1.0), UNIT_CH)


class TestMeasurementGradient:
    def test_axis_aligned_distance_row(self):
        g = measurement_gradient(relative_coords([10, 0, 0], [0, 0, 0]))
        assert g[:, 0] == pytest.approx([1.0, 0.0, 0.0], abs=1e-15)

    def test_axis_aligned_azimuth_column(self):
        # d(phi)/dy = xt/d2^2 = 10/100; frozen from the finite-difference oracle
        source, anchor = np.array([10.0, 0.0, 0.0]), np.zeros(3)
        numeric = fd_gradient(source, anchor)
        assert numeric[1, 1] == pytest.approx(0.1, abs=1e-9)
        g = measurement_gradient(relative_coords(source, anchor))
        assert g[:, 1] == pytest.approx([0.0, 0.1, 0.0], abs=1e-14)

    def test_finite_difference_oracle(self):
        # small version of the acceptance criterion (full 1e4 runs there)
        rng = np.random.default_rng(5)
        for _ in range(200):
            source = rng.uniform(-50, 50, 3)
            anchor = rng.uniform(-50, 50, 3)
            r = relative_coords(source, anchor)
            if r.d < 2.0 or r.d2 < 1.0:
                continue
            analytic = measurement_gradient(r)
            numeric = fd_gradient(source, anchor)
            col_scale = np.maximum(np.max(np.abs(analytic), axis=0), 1e-30)
            dev = np.abs(numeric - analytic) / np.maximum(np.abs(analytic), col_scale)
            assert np.max(dev) <= 1e-6

    def test_paper_literal_flips_two_signs(self):
        r = relative_coords([7.0, 3.0, -2.0], [1.0, 1.0, 1.0])
        g = measurement_gradient(r)
        gp = measurement_gradient(r, GradientVariant.PAPER_LITERAL)
        assert gp[1, 1] == -g[1, 1]
        assert gp[2, 2] == -g[2, 2]
        flip = np.ones((3, 3))
        flip[1, 1] = flip[2, 2] = -1.0
        assert np.array_equal(gp, g * flip)

    def test_degenerate(self):
        with pytest.raises(DegenerateGeometry):
            measurement_gradient(relative_coords([0, 0, 10], [0, 0, 0]))


class TestFimUncertainAnchors:
    def test_axis_aligned_identity(self):
        # G = [[1,0,0],[0,.1,0],[0,0,-.1]], C = diag(1,.01,.01) => J = I
        n = NoiseModel(sigma_dx=1.0, sigma_dy=1.0, sigma_dz=1.0)
        j = fim_uncertain_anchors([10, 0, 0], [[0, 0, 0]], n, UNIT_CH)
        assert j == pytest.approx(np.eye(3), abs=1e-13)

    def test_vanishing_drift_recovers_known_bound(self):
        rng = np.random.default_rng(8)
        source, anchors = random_scenario(rng)
        meas = dict(sigma_d=2.0, sigma_phi=0.03, sigma_theta=0.05)
        j_known = fim_known_anchors(source, anchors, NoiseModel(**meas), UNIT_CH)
        tiny = NoiseModel(**meas, sigma_dx=1e-9, sigma_dy=1e-9, sigma_dz=1e-9)
        j_apu = fim_uncertain_anchors(
            source, anchors, tiny, UNIT_CH, include_measurement_noise=True
        )
        assert np.max(np.abs(j_apu - j_known)) <= 1e-6 * np.max(np.abs(j_known))

    def test_drift_scaling_homogeneity(self):
        # scaling all drift sigmas by s scales the pure-uncertainty CRLB by s^2
        rng = np.random.default_rng(21)
        source, anchors = random_scenario(rng)
        s = 2.5
        base = NoiseModel(sigma_dx=0.8, sigma_dy=1.1, sigma_dz=0.9)
        scaled = NoiseModel(sigma_dx=0.8 * s, sigma_dy=1.1 * s, sigma_dz=0.9 * s)
        variant = CovarianceVariant.DERIVED_FORMULAS
        t1 = crlb_from_fim(fim_uncertain_anchors(source, anchors, base, UNIT_CH, variant)).total
        t2 = crlb_from_fim(fim_uncertain_anchors(source, anchors, scaled, UNIT_CH, variant)).total
        assert t2 == pytest.approx(s**2 * t1, rel=1e-10)

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(6)
        n = NoiseModel(2.0, 0.03, 0.05, 1.5, 1.5, 1.5)
        for variant in CovarianceVariant:
            source, anchors = random_scenario(rng)
            j = fim_uncertain_anchors(
                source, anchors, n, UNIT_CH, variant, include_measurement_noise=True
            )
            assert np.array_equal(j, j.T)


class TestCrlbFromFim:
    def test_diagonal(self):
        res = crlb_from_fim(np.diag([2.0, 4.0, 5.0]))
        assert (res.var_x, res.var_y, res.var_z) == (0.5, 0.25, 0.2)
        assert res.total == 0.95

    def test_identity(self):
        res = crlb_from_fim(np.eye(3))
        assert (res.var_x, res.var_y, res.var_z, res.total) == (1.0, 1.0, 1.0, 3.0)

    def test_matches_general_inverse(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            j = random_spd_matrix(rng)
            res = crlb_from_fim(j)
            ref = np.diag(np.linalg.inv(j))
            got = np.array([res.var_x, res.var_y, res.var_z])
            assert np.max(np.abs(got - ref) / np.abs(ref)) <= 1e-10

    def test_singular_rejected(self):
        with pytest.raises(SingularFim):
            crlb_from_fim(np.diag([1.0, 1.0, 0.0]))
        with pytest.raises(SingularFim):
            crlb_from_fim(np.diag([1.0, 1.0, 1e-15]))

    def test_result_is_dataclass_with_sum(self):
        res = CrlbResult(var_x=1.0, var_y=2.0, var_z=3.0, total=6.0)
        assert res.total == res.var_x + res.var_y + res.var_z


class TestScenarioInvariants:
    def test_anchor_monotonicity_small(self):
        # appending an anchor adds a PSD term: total bound non-increasing
        rng = np.random.default_rng(14)
        n = NoiseModel(sigma_d=2.0, sigma_phi=0.03, sigma_theta=0.05)
        for _ in range(10):
            source, anchors = random_scenario(rng, n_anchors=8)
            totals = [
                crlb_from_fim(fim_known_anchors(source, anchors[:m], n, UNIT_CH)).total
                for m in range(1, 9)
            ]
            for prev, cur in zip(totals, totals[1:]):
                assert cur <= prev * (1.0 + 1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(15)
        n = NoiseModel(sigma_d=2.0, sigma_phi=0.03, sigma_theta=0.05)
        source, anchors = random_scenario(rng)
        shift = np.array([123.0, -57.0, 31.0])
        t1 = crlb_from_fim(fim_known_anchors(source, anchors, n, UNIT_CH)).total
        t2 = crlb_from_fim(fim_known_anchors(source + shift, anchors + shift, n, UNIT_CH)).total
        assert t2 == pytest.approx(t1, rel=1e-9)
