"""Quality metrics: identities, paper-anchored arithmetic, oracle checks."""

import numpy as np
import pytest

from pakan.data import synth_scene, wald_degrade
from pakan.errors import ConfigError, ShapeError, ValidationError
from pakan.metrics import (MetricReport, d_lambda, d_s, ergas, hqnr, psnr,
                           q2n, q_index, sam)
from pakan.tensorgraph import Tensor, resample

# identity-fuser values recorded from the seeded oracle run (20 scenes);
# regenerating the scenes must reproduce them within float tolerance
DL_IDENTITY_MAX = 0.045
DS_IDENTITY_MAX = 0.151


def up4(x):
    return resample(Tensor(x[None]), "bilinear_up", 4).data[0]


class TestPsnr:
    def test_identical_capped(self):
        x = np.random.default_rng(0).uniform(0, 1, (3, 8, 8))
        assert psnr(x, x) == 100.0

    def test_mse_equal_peak_squared_is_zero_db(self):
        x = np.zeros((1, 2, 2))
        ref = np.ones((1, 2, 2))
        assert abs(psnr(x, ref)) < 1e-12

    def test_hand_value(self):
        x = np.array([[[0.0, 0.0]]])
        ref = np.array([[[0.1, 0.3]]])
        assert abs(psnr(x, ref) - 10 * np.log10(1 / 0.05)) < 1e-12
        assert abs(psnr(x, ref) - 13.010299956639813) < 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(np.zeros((1, 2, 2)), np.zeros((1, 2, 3)))


class TestSam:
    def test_identical_zero(self):
        x = np.random.default_rng(1).uniform(0.1, 1, (3, 5, 5))
        assert sam(x, x) == 0.0

    def test_orthogonal_90(self):
        x = np.zeros((2, 4, 4))
        x[0] = 1.0
        y = np.zeros((2, 4, 4))
        y[1] = 1.0
        assert abs(sam(x, y) - 90.0) < 1e-12

    def test_45_degrees(self):
        x = np.ones((2, 3, 3))
        y = np.zeros((2, 3, 3))
        y[0] = 1.0
        assert abs(sam(x, y) - 45.0) < 1e-9

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        a = rng.uniform(0.1, 1, (4, 6, 6))
        b = rng.uniform(0.1, 1, (4, 6, 6))
        assert sam(a, b) == sam(b, a)

    def test_zero_norm_pixels_contribute_zero(self):
        x = np.zeros((2, 1, 2))
        y = np.zeros((2, 1, 2))
        x[:, 0, 1] = 1.0
        y[:, 0, 1] = 1.0
        assert sam(x, y) == 0.0


class TestErgas:
    def test_identical_zero(self):
        x = np.random.default_rng(3).uniform(0.1, 1, (3, 4, 4))
        assert ergas(x, x) == 0.0

    def test_hand_value(self):
        ref = np.full((1, 4, 4), 0.5)
        x = np.full((1, 4, 4), 0.6)
        assert abs(ergas(x, ref, ratio=4) - 5.0) < 1e-9

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        ref = rng.uniform(0.2, 1, (3, 8, 8))
        x = ref + rng.normal(0, 0.05, ref.shape)
        assert abs(ergas(x, ref) - ergas(3.7 * x, 3.7 * ref)) < 1e-9

    def test_zero_mean_band_rejected(self):
        ref = np.ones((2, 4, 4))
        ref[1] = 0.0
        with pytest.raises(ValidationError, match="band 1"):
            ergas(ref.copy(), ref)


class TestQIndex:
    def test_identical_nonconstant_is_one(self):
        a = np.random.default_rng(5).uniform(0, 1, (32, 32))
        assert abs(q_index(a, a) - 1.0) < 1e-12

    def test_negated_zero_mean_is_minus_one(self):
        # adjacent +w/-w pairs cancel exactly under pairwise summation,
        # making the block mean exactly zero
        rng = np.random.default_rng(6)
        w = rng.normal(0, 1, 512)
        a = np.empty(1024)
        a[0::2] = w
        a[1::2] = -w
        a = a.reshape(32, 32)
        assert a.mean() == 0.0
        assert q_index(a, -a) == -1.0

    def test_constant_pair_degenerate_rule(self):
        a = np.full((8, 8), 0.3)
        assert q_index(a, a.copy()) == 1.0

    def test_constant_vs_other_constant(self):
        a = np.full((8, 8), 1.0)
        b = np.full((8, 8), 3.0)
        assert abs(q_index(a, b) - 0.6) < 1e-12  # 2*1*3/(1+9)

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(0, 1, (40, 40))
        b = rng.uniform(0, 1, (40, 40))
        assert q_index(a, b) == q_index(b, a)

    def test_range(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a = rng.normal(size=(16, 16))
            b = rng.normal(size=(16, 16))
            assert -1.0 - 1e-12 <= q_index(a, b) <= 1.0 + 1e-12


def complex_q_oracle(x, ref):
    """Independent two-band hypercomplex Q on a single block via complex128."""
    za = x[0].ravel() + 1j * x[1].ravel()
    zb = ref[0].ravel() + 1j * ref[1].ravel()
    mu_a, mu_b = za.mean(), zb.mean()
    va = np.mean(np.abs(za) ** 2) - abs(mu_a) ** 2
    vb = np.mean(np.abs(zb) ** 2) - abs(mu_b) ** 2
    cov = np.mean(za * np.conj(zb)) - mu_a * np.conj(mu_b)
    return 4 * abs(cov) * abs(mu_a) * abs(mu_b) / ((va + vb)
                                                   * (abs(mu_a) ** 2 + abs(mu_b) ** 2))


class TestQ2n:
    def test_identity(self):
        x = np.random.default_rng(9).uniform(0, 1, (4, 32, 32))
        assert abs(q2n(x, x) - 1.0) < 1e-9

    def test_single_band_reduces_to_q_index(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            a = rng.uniform(0, 1, (1, 32, 32))
            b = rng.uniform(0, 1, (1, 32, 32))
            assert abs(q2n(a, b) - q_index(a[0], b[0])) < 1e-9

    def test_negated_band_strictly_below_one(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(0.1, 1, (2, 8, 8))
        ref = x.copy()
        ref[1] = -ref[1]
        assert q2n(x, ref) < 1.0 - 1e-6

    def test_matches_complex_oracle_on_single_block(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            x = rng.uniform(0, 1, (2, 8, 8))
            ref = rng.uniform(0, 1, (2, 8, 8))
            assert abs(q2n(x, ref) - complex_q_oracle(x, ref)) < 1e-12

    def test_zero_padding_of_odd_band_counts(self):
        rng = np.random.default_rng(13)
        x = rng.uniform(0, 1, (3, 16, 16))
        assert abs(q2n(x, x) - 1.0) < 1e-9

    def test_eight_bands_supported_nine_rejected(self):
        rng = np.random.default_rng(14)
        x = rng.uniform(0, 1, (8, 8, 8))
        assert abs(q2n(x, x) - 1.0) < 1e-9
        with pytest.raises(ConfigError):
            q2n(np.zeros((9, 8, 8)), np.zeros((9, 8, 8)))


class TestDLambda:
    def test_pixel_replication_gives_zero(self):
        # single-block geometry on both scales makes the statistics identical
        rng = np.random.default_rng(15)
        ms = rng.uniform(0, 1, (4, 8, 8))
        fused = np.repeat(np.repeat(ms, 4, axis=1), 4, axis=2)
        assert d_lambda(fused, ms) < 1e-6

    def test_identity_fuser_stays_below_bound(self):
        vals = []
        for seed in range(20):
            gt = synth_scene(seed, 4, 64, 64)
            ms, _ = wald_degrade(gt)
            vals.append(d_lambda(up4(ms), ms))
        assert max(vals) < 0.05          # consistency bound
        assert max(vals) <= DL_IDENTITY_MAX  # frozen regression constant

    def test_range(self):
        rng = np.random.default_rng(16)
        fused = rng.uniform(0, 1, (3, 32, 32))
        ms = rng.uniform(0, 1, (3, 8, 8))
        assert 0.0 <= d_lambda(fused, ms) <= 1.0

    def test_needs_two_bands(self):
        with pytest.raises(ConfigError):
            d_lambda(np.zeros((1, 8, 8)), np.zeros((1, 2, 2)))


class TestDS:
    def test_pan_replication_gives_zero(self):
        rng = np.random.default_rng(17)
        pan = rng.uniform(0, 1, (1, 32, 32))
        from pakan.data import box_downsample, gaussian_blur
        pan_low = box_downsample(gaussian_blur(pan[0], 1.0), 4)
        fused = np.repeat(pan, 4, axis=0)
        ms = np.repeat(pan_low[None], 4, axis=0)
        assert d_s(fused, ms, pan) < 1e-6

    def test_identity_fuser_regression_constant(self):
        vals = []
        for seed in range(20):
            gt = synth_scene(seed, 4, 64, 64)
            ms, pan = wald_degrade(gt)
            vals.append(d_s(up4(ms), ms, pan))
        assert max(vals) <= DS_IDENTITY_MAX

    def test_range(self):
        rng = np.random.default_rng(18)
        fused = rng.uniform(0, 1, (3, 32, 32))
        ms = rng.uniform(0, 1, (3, 8, 8))
        pan = rng.uniform(0, 1, (1, 32, 32))
        assert 0.0 <= d_s(fused, ms, pan) <= 1.0


class TestHqnr:
    def test_reference_rows(self):
        # published full-resolution rows reproduce to 3 decimals
        assert round(hqnr(0.017, 0.047), 3) == 0.937
        assert round(hqnr(0.024, 0.036), 3) == 0.941

    def test_perfect(self):
        assert hqnr(0.0, 0.0) == 1.0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            hqnr(-0.1, 0.2)
        with pytest.raises(ValidationError):
            hqnr(0.1, 1.2)


class TestMonotoneDegradation:
    def test_noise_moves_all_metrics_monotonically(self):
        amps = [0.01, 0.02, 0.04, 0.08, 0.16]
        for seed in range(3):
            rng = np.random.default_rng(100 + seed)
            ref = synth_scene(200 + seed, 4, 64, 64) * 0.6 + 0.2
            noise = rng.normal(size=ref.shape)
            noise -= noise.mean()
            ps, qs, ss, es = [], [], [], []
            for amp in amps:
                x = ref + amp * noise
                ps.append(psnr(x, ref))
                qs.append(q2n(x, ref))
                ss.append(sam(x, ref))
                es.append(ergas(x, ref))
            assert all(a > b for a, b in zip(ps, ps[1:])), ps
            assert all(a > b for a, b in zip(qs, qs[1:])), qs
            assert all(a < b for a, b in zip(ss, ss[1:])), ss
            assert all(a < b for a, b in zip(es, es[1:])), es


class TestReport:
    def test_aggregate_recomputable(self):
        rep = MetricReport(resolution="reduced")
        rng = np.random.default_rng(19)
        vals = {}
        for i in range(7):
            v = float(rng.uniform(10, 40))
            vals[f"s{i}"] = v
            rep.add(f"s{i}", {"psnr": v})
        mean, std = rep.aggregate()["psnr"]
        arr = np.array(list(vals.values()))
        assert abs(mean - arr.mean()) < 1e-12
        assert abs(std - arr.std()) < 1e-12

    def test_lines_round_trip_floats(self):
        rep = MetricReport(resolution="reduced")
        rep.add("s0", {"sam": 1.23456789012345e-07})
        line = rep.format_lines()[0]
        sid, name, val = line.split("\t")
        assert (sid, name) == ("s0", "sam")
        assert float(val) == 1.23456789012345e-07
