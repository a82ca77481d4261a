"""Container format, scene synthesis, Wald degradation, PNG export."""

import numpy as np
import pytest
from PIL import Image

from pakan.data import (DN_MAX, SamplePair, box_downsample, denormalize,
                        export_png, export_residual_png, gaussian_blur,
                        gaussian_kernel1d, load_pair, make_dataset, normalize,
                        pktn_read, pktn_write, read_manifest, split_counts,
                        synth_scene, wald_degrade)
from pakan.errors import ConfigError, PktnError, ValidationError


class TestPktn:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        entries = [
            ("a", rng.normal(size=(2, 3, 4, 5)).astype(np.float32)),
            ("b", rng.normal(size=(7,)).astype(np.float32)),
            ("empty_dims", np.float32(3.5).reshape(())),
        ]
        path = tmp_path / "t.pktn"
        pktn_write(path, entries)
        back = pktn_read(path)
        assert [n for n, _ in back] == ["a", "b", "empty_dims"]
        for (n1, a1), (n2, a2) in zip(entries, back):
            assert a1.shape == a2.shape
            assert np.array_equal(a1, a2)

    def test_empty_file_is_nine_bytes(self, tmp_path):
        path = tmp_path / "e.pktn"
        pktn_write(path, [])
        assert path.stat().st_size == 9
        assert pktn_read(path) == []

    def test_bad_magic_offset_zero(self, tmp_path):
        path = tmp_path / "bad.pktn"
        path.write_bytes(b"XKTN" + bytes(5))
        with pytest.raises(PktnError, match="offset 0"):
            pktn_read(path)

    def test_truncated_payload_reports_offset(self, tmp_path):
        path = tmp_path / "t.pktn"
        pktn_write(path, [("x", np.ones((4, 4), dtype=np.float32))])
        blob = path.read_bytes()
        path.write_bytes(blob[:-10])
        with pytest.raises(PktnError, match="offset"):
            pktn_read(path)

    def test_duplicate_names_rejected_on_write(self, tmp_path):
        with pytest.raises(PktnError):
            pktn_write(tmp_path / "d.pktn",
                       [("x", np.ones(2)), ("x", np.ones(2))])

    def test_duplicate_names_rejected_on_read(self, tmp_path):
        path = tmp_path / "d.pktn"
        pktn_write(path, [("x", np.ones(2, dtype=np.float32)),
                          ("y", np.ones(2, dtype=np.float32))])
        blob = bytearray(path.read_bytes())
        # second entry name 'y' -> 'x' (same length, no structural change)
        idx = blob.rindex(b"y")
        blob[idx:idx + 1] = b"x"
        path.write_bytes(bytes(blob))
        with pytest.raises(PktnError, match="duplicate"):
            pktn_read(path)

    def test_rank4_limit(self, tmp_path):
        with pytest.raises(Exception):
            pktn_write(tmp_path / "r.pktn", [("x", np.ones((1,) * 5))])


class TestNormalize:
    def test_peak_maps_to_one(self):
        assert normalize(np.array([2047.0]))[0] == 1.0

    def test_zero(self):
        assert normalize(np.array([0.0]))[0] == 0.0

    def test_midpoint(self):
        assert normalize(np.array([1023.5]))[0] == 0.5

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        raw = rng.uniform(0, DN_MAX, 1000)
        back = denormalize(normalize(raw))
        assert np.abs(back - raw).max() < 1e-9

    def test_out_of_range_reports_count_and_extrema(self):
        raw = np.array([-3.0, 5.0, 2050.0])
        with pytest.raises(ValidationError, match="2 values"):
            normalize(raw)


class TestSynthScene:
    def test_deterministic(self):
        a = synth_scene(123, 4, 64, 64)
        b = synth_scene(123, 4, 64, 64)
        assert np.array_equal(a, b)

    def test_within_unit_range_many_seeds(self):
        for seed in range(200):
            s = synth_scene(seed, 3, 16, 16)
            assert s.min() >= 0.0 and s.max() <= 1.0

    def test_heavy_tailed_gradients(self):
        for seed in range(10):
            s = synth_scene(seed, 4, 64, 64)
            gy, gx = np.gradient(s[0])
            mag = np.hypot(gy, gx)
            assert mag.max() > 5 * np.median(mag)

    def test_rejects_bad_dims(self):
        with pytest.raises(ConfigError):
            synth_scene(0, 4, 63, 64)


class TestWaldDegrade:
    def test_constant_scene_passthrough(self):
        gt = np.full((3, 16, 16), 0.42)
        lr, pan = wald_degrade(gt)
        assert np.abs(lr - 0.42).max() < 1e-12
        assert np.abs(pan - 0.42).max() < 1e-12

    def test_output_dims(self):
        gt = np.zeros((4, 64, 64))
        lr, pan = wald_degrade(gt)
        assert lr.shape == (4, 16, 16)
        assert pan.shape == (1, 64, 64)

    def test_blur_preserves_mass_of_centered_impulse(self):
        gt = np.zeros((1, 64, 64))
        gt[0, 32, 32] = 1.0
        lr, _ = wald_degrade(gt)
        # blur kernel sums to 1; decimation preserves the mean
        assert abs(lr.sum() - 1.0 / 16.0) < 1e-6

    def test_kernel_normalized(self):
        assert abs(gaussian_kernel1d(1.0).sum() - 1.0) < 1e-12
        assert len(gaussian_kernel1d(1.0)) == 9  # radius round(4 sigma)

    def test_blur_reflect_keeps_constants(self):
        img = np.full((5, 12, 12), 0.7)
        assert np.abs(gaussian_blur(img, 1.0) - 0.7).max() < 1e-12

    def test_box_downsample_exact(self):
        x = np.arange(16.0).reshape(4, 4)
        out = box_downsample(x, 2)
        assert np.array_equal(out, [[2.5, 4.5], [10.5, 12.5]])


class TestSamplePair:
    def test_generated_pair_validates(self):
        gt = synth_scene(5, 4, 64, 64)
        lr, pan = wald_degrade(gt)
        SamplePair(lr, pan, gt).validate(tol=1e-6)

    def test_inconsistent_pair_rejected(self):
        gt = synth_scene(6, 4, 64, 64)
        lr, pan = wald_degrade(gt)
        lr = lr + 0.01
        with pytest.raises(ValidationError):
            SamplePair(lr, pan, gt).validate(tol=1e-6)


class TestDataset:
    def test_split_sizes(self):
        assert split_counts(64) == (48, 8, 8)
        assert split_counts(8) == (6, 1, 1)

    def test_make_and_read_round_trip(self, tmp_path):
        m = make_dataset(tmp_path / "ds", seed=3, count=8, bands=4,
                         height=32, width=32)
        back = read_manifest(tmp_path / "ds")
        assert back.entries == m.entries
        assert back.bands == 4 and back.seed == 3
        sid, path = back.paths("train")[0]
        pair = load_pair(path)
        pair.validate(tol=1e-6)
        assert pair.lr_ms.shape == (4, 8, 8)

    def test_byte_identical_regeneration(self, tmp_path):
        make_dataset(tmp_path / "a", seed=9, count=4, bands=3,
                     height=16, width=16)
        make_dataset(tmp_path / "b", seed=9, count=4, bands=3,
                     height=16, width=16)
        for name in ["manifest.txt"] + [f"s{i:04d}.pktn" for i in range(4)]:
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_stored_pairs_satisfy_degradation_consistency(self, tmp_path):
        m = make_dataset(tmp_path / "ds", seed=11, count=4, bands=4)
        for _, path in m.paths("train") + m.paths("val") + m.paths("test"):
            load_pair(path).validate(tol=1e-6)


class TestPng:
    def test_constant_image_mid_gray(self, tmp_path):
        path = tmp_path / "c.png"
        export_png(np.full((3, 8, 8), 0.5), (0, 1, 2), path)
        arr = np.asarray(Image.open(path))
        assert arr.shape == (8, 8, 3)
        assert (arr == 128).all()

    def test_ramp_monotone_full_range(self, tmp_path):
        ramp = np.linspace(0, 1, 256).reshape(1, 16, 16)
        x = np.concatenate([ramp] * 3, axis=0)
        path = tmp_path / "r.png"
        export_png(x, (0, 1, 2), path)
        arr = np.asarray(Image.open(path))[..., 0].reshape(-1)
        assert arr[0] == 0 and arr[-1] == 255
        assert (np.diff(arr.astype(int)) >= 0).all()

    def test_round_trip_dims(self, tmp_path):
        path = tmp_path / "d.png"
        export_png(np.random.default_rng(0).uniform(0, 1, (4, 10, 12)),
                   (2, 1, 0), path)
        assert np.asarray(Image.open(path)).shape == (10, 12, 3)

    def test_bad_band_index_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            export_png(np.zeros((3, 4, 4)), (0, 1, 5), tmp_path / "x.png")

    def test_residual_map_signed_colors(self, tmp_path):
        r = np.zeros((6, 6))
        r[0, 0] = 1.0   # positive -> red
        r[5, 5] = -1.0  # negative -> blue
        path = tmp_path / "res.png"
        export_residual_png(r, path)
        arr = np.asarray(Image.open(path)).astype(int)
        assert arr[0, 0, 0] > arr[0, 0, 2]   # red dominates
        assert arr[5, 5, 2] > arr[5, 5, 0]   # blue dominates
        assert (arr[3, 3] == [255, 255, 255]).all()  # zero -> white
