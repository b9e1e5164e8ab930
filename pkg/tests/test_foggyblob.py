import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from ccseg.foggyblob import (
    AnnotatorProfile,
    FoggyConfig,
    FoggySample,
    generate_dataset,
    generate_sample,
    load_manifest,
    load_sample,
    simulate_cc,
    simulate_singular,
)
from ccseg.mask import SegMask, area, is_subset


CFG = FoggyConfig(seed=42)


class TestConfig:
    def test_defaults_valid(self):
        cfg = FoggyConfig()
        assert cfg.image_size == 128
        assert cfg.blur_sigma == 2.5

    def test_rejects_unordered_ranges(self):
        with pytest.raises(ValueError):
            FoggyConfig(core_radius_range=(0.4, 0.2))

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            FoggyConfig(image_size=16)

    def test_rejects_extreme_intensities(self):
        with pytest.raises(ValueError):
            FoggyConfig(branch_intensity_range=(0.0, 0.5))
        with pytest.raises(ValueError):
            FoggyConfig(branch_intensity_range=(0.5, 1.0))


class TestGenerateSample:
    def test_deterministic(self):
        a = generate_sample(CFG, 3)
        b = generate_sample(CFG, 3)
        assert np.array_equal(a.image, b.image)
        assert a.core_mask == b.core_mask
        assert len(a.branch_masks) == len(b.branch_masks)
        for ma, mb in zip(a.branch_masks, b.branch_masks):
            assert ma == mb
        assert a.branch_intensities == b.branch_intensities

    def test_different_indices_differ(self):
        a = generate_sample(CFG, 0)
        b = generate_sample(CFG, 1)
        assert not np.array_equal(a.image, b.image)

    def test_image_shape_and_dtype(self):
        s = generate_sample(CFG, 0)
        assert s.image.shape == (128, 128)
        assert s.image.dtype == np.uint8

    def test_core_area_tracks_drawn_radius(self):
        cfg = FoggyConfig(seed=9)
        for i in range(40):
            s = generate_sample(cfg, i)
            r = s.core_radius
            amp = cfg.core_perturb_amp
            lo = math.pi * (0.9 * r * (1 - amp)) ** 2
            hi = math.pi * (1.1 * r * (1 + amp)) ** 2
            assert lo <= area(s.core_mask) <= hi

    def test_branches_disjoint_from_core(self):
        for i in range(20):
            s = generate_sample(CFG, i)
            for bm in s.branch_masks:
                assert not np.any(bm.pixels & s.core_mask.pixels)
                assert np.any(bm.pixels)  # empty branches are dropped

    def test_branch_counts_and_intensities_in_range(self):
        for i in range(30):
            s = generate_sample(CFG, i)
            assert len(s.branch_masks) <= CFG.branch_count_range[1]
            lo, hi = CFG.branch_intensity_range
            for t in s.branch_intensities:
                assert lo <= t <= hi

    def test_blob_is_connected(self):
        for i in range(30):
            s = generate_sample(CFG, i)
            combined = s.core_mask.pixels.copy()
            for bm in s.branch_masks:
                combined |= bm.pixels
            _, count = ndimage.label(combined, structure=np.ones((3, 3)))
            assert count == 1

    def test_core_bright_background_dark(self):
        for i in range(10):
            s = generate_sample(CFG, i)
            interior = ndimage.binary_erosion(
                s.core_mask.pixels, np.ones((3, 3)), iterations=6
            )
            if np.any(interior):
                assert s.image[interior].min() >= 200
            everything = s.core_mask.pixels.copy()
            for bm in s.branch_masks:
                everything |= bm.pixels
            far = ~ndimage.binary_dilation(
                everything, np.ones((3, 3)), iterations=12
            )
            assert s.image[far].max() <= 40

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError):
            generate_sample(CFG, -1)

    def test_sample_validation(self):
        with pytest.raises(ValueError):
            FoggySample(
                index=0,
                image=np.zeros((8, 8), dtype=np.uint8),
                core_mask=SegMask.empty(8, 8),
                branch_masks=[],
                branch_intensities=[0.5],
            )


class TestGenerateDataset:
    def test_layout_and_manifest(self, tmp_path):
        cfg = FoggyConfig(seed=1, image_size=64)
        manifest = generate_dataset(cfg, 4, tmp_path)
        assert manifest["dataset_id"] == "foggyblob-s1-n4"
        assert manifest["config"]["image_size"] == 64
        assert len(manifest["samples"]) == 4
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk == manifest
        for entry in manifest["samples"]:
            assert (tmp_path / entry["image"]).is_file()
            assert (tmp_path / entry["core_mask"]).is_file()
            assert len(entry["branch_masks"]) == len(entry["branch_intensities"])
            for rel in entry["branch_masks"]:
                assert (tmp_path / rel).is_file()

    def test_round_trip_equals_generated(self, tmp_path):
        cfg = FoggyConfig(seed=5, image_size=64)
        manifest = generate_dataset(cfg, 3, tmp_path)
        for i, entry in enumerate(manifest["samples"]):
            loaded = load_sample(tmp_path, entry)
            direct = generate_sample(cfg, i)
            assert np.array_equal(loaded.image, direct.image)
            assert loaded.core_mask == direct.core_mask
            assert len(loaded.branch_masks) == len(direct.branch_masks)
            for ma, mb in zip(loaded.branch_masks, direct.branch_masks):
                assert ma == mb
            assert loaded.branch_intensities == pytest.approx(
                direct.branch_intensities
            )

    def test_byte_identical_reruns(self, tmp_path):
        cfg = FoggyConfig(seed=7, image_size=64)
        generate_dataset(cfg, 2, tmp_path / "a")
        generate_dataset(cfg, 2, tmp_path / "b")
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (tmp_path / "a" / rel).read_bytes() == (
                tmp_path / "b" / rel
            ).read_bytes()

    def test_zero_samples_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            generate_dataset(CFG, 0, tmp_path)

    def test_manifest_loader_checks_shape(self, tmp_path):
        (tmp_path / "manifest.json").write_text('{"samples": []}')
        with pytest.raises(ValueError):
            load_manifest(tmp_path / "manifest.json")


class TestProfiles:
    def test_validation(self):
        with pytest.raises(ValueError):
            AnnotatorProfile(seed=1, sensitivity=1.5)
        with pytest.raises(ValueError):
            AnnotatorProfile(seed=1, boundary_jitter=-1)
        with pytest.raises(ValueError):
            AnnotatorProfile(seed=1, low_threshold=0.8, high_threshold=0.3)


class TestSimulateSingular:
    def test_zero_sensitivity_keeps_core_only(self):
        profile = AnnotatorProfile(seed=11, sensitivity=0.0, boundary_jitter=0)
        for i in range(10):
            s = generate_sample(CFG, i)
            ann = simulate_singular(s, profile)
            assert ann.mask == s.core_mask

    def test_deterministic_per_profile(self):
        s = generate_sample(CFG, 2)
        profile = AnnotatorProfile(seed=13, sensitivity=0.7, boundary_jitter=2)
        assert simulate_singular(s, profile) == simulate_singular(s, profile)

    def test_seeds_differ(self):
        # over several samples, two annotators with different seeds cannot
        # keep producing identical masks
        a = AnnotatorProfile(seed=1, sensitivity=0.6)
        b = AnnotatorProfile(seed=2, sensitivity=0.6)
        same = 0
        for i in range(10):
            s = generate_sample(CFG, i)
            if simulate_singular(s, a) == simulate_singular(s, b):
                same += 1
        assert same < 10

    def test_sensitivity_monotone(self):
        # with a shared seed the random draws match, so a more sensitive
        # annotator marks a superset
        for i in range(10):
            s = generate_sample(CFG, i)
            low = simulate_singular(s, AnnotatorProfile(seed=5, sensitivity=0.2))
            high = simulate_singular(s, AnnotatorProfile(seed=5, sensitivity=0.9))
            assert is_subset(low.mask, high.mask)

    def test_mask_is_core_plus_branches(self):
        profile = AnnotatorProfile(seed=17, sensitivity=1.0)
        for i in range(10):
            s = generate_sample(CFG, i)
            ann = simulate_singular(s, profile)
            allowed = s.core_mask.pixels.copy()
            for bm in s.branch_masks:
                allowed |= bm.pixels
            assert is_subset(s.core_mask, ann.mask)
            assert is_subset(ann.mask, SegMask(allowed))


class TestSimulateCC:
    def test_min_within_max_under_jitter(self):
        profile = AnnotatorProfile(
            seed=19, low_threshold=0.3, high_threshold=0.7, boundary_jitter=2
        )
        for i in range(20):
            s = generate_sample(CFG, i)
            cc = simulate_cc(s, profile)
            assert is_subset(cc.min, cc.max)

    def test_thresholds_select_branches(self):
        profile = AnnotatorProfile(
            seed=23, low_threshold=0.3, high_threshold=0.7, boundary_jitter=0
        )
        for i in range(10):
            s = generate_sample(CFG, i)
            cc = simulate_cc(s, profile)
            want_min = s.core_mask.pixels.copy()
            want_max = s.core_mask.pixels.copy()
            for bm, t in zip(s.branch_masks, s.branch_intensities):
                if t >= 0.7:
                    want_min |= bm.pixels
                if t >= 0.3:
                    want_max |= bm.pixels
            assert np.array_equal(cc.min.pixels, want_min)
            assert np.array_equal(cc.max.pixels, want_max)

    def test_equal_thresholds_collapse(self):
        profile = AnnotatorProfile(
            seed=29, low_threshold=0.5, high_threshold=0.5, boundary_jitter=0
        )
        s = generate_sample(CFG, 1)
        cc = simulate_cc(s, profile)
        assert cc.min == cc.max

    def test_deterministic(self):
        s = generate_sample(CFG, 4)
        profile = AnnotatorProfile(seed=31, boundary_jitter=2)
        a = simulate_cc(s, profile)
        b = simulate_cc(s, profile)
        assert a.min == b.min and a.max == b.max
