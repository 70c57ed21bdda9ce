import json

import numpy as np
import pytest

from percept_loop import dataio
from percept_loop.dataio import (
    DegradationConfig,
    DegradationRecipe,
    SplitSpec,
    apply_recipe,
    crop_patch,
    gaussian_blur,
    generate_degraded_corpus,
    load_image,
    load_manifest,
    patch_offset,
    save_image,
    split_by_content,
)


# ---------------------------------------------------------------------
# Oracles (straight-line reimplementations, kept independent of dataio)
# ---------------------------------------------------------------------

def blur_oracle(image, sigma):
    """Direct 2-D windowed sum with mirrored (reflect-101) borders."""
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (x / sigma) ** 2)
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    h, w, c = image.shape
    padded = np.pad(image.astype(np.float64),
                    ((radius, radius), (radius, radius), (0, 0)),
                    mode="reflect")
    out = np.zeros_like(image, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for ch in range(c):
                win = padded[i:i + 2 * radius + 1, j:j + 2 * radius + 1, ch]
                out[i, j, ch] = float(np.sum(win * k2))
    return out


def recipe_oracle(image, recipe, noise):
    """Scalar-loop reapplication of the recipe steps, noise supplied."""
    h, w, _ = image.shape
    out = image.astype(np.float64).copy()

    def clip(v):
        return min(1.0, max(0.0, v))

    if recipe.gamma != 1.0:
        for i in range(h):
            for j in range(w):
                for c in range(3):
                    out[i, j, c] = clip(
                        np.float32(out[i, j, c]) ** np.float32(recipe.gamma))
    if recipe.blur_sigma > 0:
        out = np.clip(blur_oracle(out.astype(np.float32), recipe.blur_sigma),
                      0.0, 1.0)
        out = out.astype(np.float32).astype(np.float64)
    if tuple(recipe.gains) != (1.0, 1.0, 1.0):
        for i in range(h):
            for j in range(w):
                for c in range(3):
                    out[i, j, c] = clip(
                        np.float32(out[i, j, c]) * np.float32(recipe.gains[c]))
    if recipe.contrast != 1.0:
        for i in range(h):
            for j in range(w):
                for c in range(3):
                    out[i, j, c] = clip(
                        (np.float32(out[i, j, c]) - 0.5)
                        * np.float32(recipe.contrast) + 0.5)
    if recipe.exposure_offset != 0.0:
        for i in range(h):
            for j in range(w):
                for c in range(3):
                    out[i, j, c] = clip(np.float32(out[i, j, c])
                                        + np.float32(recipe.exposure_offset))
    if recipe.noise_sigma > 0:
        for i in range(h):
            for j in range(w):
                for c in range(3):
                    out[i, j, c] = clip(np.float32(out[i, j, c])
                                        + np.float32(noise[i, j, c]))
    return out.astype(np.float32)


# ---------------------------------------------------------------------
# Image files
# ---------------------------------------------------------------------

class TestImageIO:
    def test_uint8_scaling(self, tmp_path):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        img[0, 0] = (255, 0, 128)
        import cv2
        cv2.imwrite(str(tmp_path / "t.png"),
                    cv2.cvtColor(img, cv2.COLOR_RGB2BGR))
        loaded = load_image(tmp_path / "t.png")
        assert loaded[0, 0, 0] == 1.0
        assert loaded[0, 0, 1] == 0.0
        assert loaded[0, 0, 2] == pytest.approx(128 / 255)

    def test_uint16_scaling(self, tmp_path):
        import cv2
        img = np.full((4, 4, 3), 65535, dtype=np.uint16)
        cv2.imwrite(str(tmp_path / "t16.png"), img)
        loaded = load_image(tmp_path / "t16.png")
        assert loaded.max() == 1.0 and loaded.min() == 1.0

    def test_roundtrip_bit_identical(self, tmp_path, rng):
        img = (rng.integers(0, 256, size=(20, 30, 3)) / 255.0).astype(np.float32)
        save_image(tmp_path / "a.png", img)
        again = load_image(tmp_path / "a.png")
        save_image(tmp_path / "b.png", again)
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
        np.testing.assert_array_equal(img, again)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "nope.png")

    def test_non_rgb_rejected(self, tmp_path):
        import cv2
        cv2.imwrite(str(tmp_path / "gray.png"),
                    np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError, match="3-channel"):
            load_image(tmp_path / "gray.png")


# ---------------------------------------------------------------------
# Degradations
# ---------------------------------------------------------------------

class TestRecipes:
    def test_identity_recipe_is_exact(self, random_image):
        out = apply_recipe(random_image, DegradationRecipe(),
                           np.random.default_rng(0))
        assert np.max(np.abs(out - random_image)) == 0.0

    def test_gamma_two_squares(self):
        img = np.full((4, 4, 3), 0.5, dtype=np.float32)
        out = apply_recipe(img, DegradationRecipe(gamma=2.0),
                           np.random.default_rng(0))
        np.testing.assert_allclose(out, 0.25, atol=1e-7)

    def test_full_recipe_matches_scalar_loop(self):
        rng = np.random.default_rng(5)
        img = rng.random((64, 64, 3)).astype(np.float32)
        recipe = DegradationRecipe(gamma=1.7, blur_sigma=0.9,
                                   gains=(0.8, 1.0, 1.2), contrast=0.8,
                                   exposure_offset=-0.05, noise_sigma=0.02)
        noise = np.random.default_rng(99).normal(0, recipe.noise_sigma,
                                                 img.shape).astype(np.float32)
        got = apply_recipe(img, recipe, np.random.default_rng(99))
        want = recipe_oracle(img, recipe, noise)
        np.testing.assert_allclose(got, want, atol=2e-6)

    def test_blur_matches_direct_window_sum(self):
        rng = np.random.default_rng(3)
        img = rng.random((16, 18, 3)).astype(np.float32)
        got = gaussian_blur(img, 1.3)
        want = blur_oracle(img, 1.3)
        np.testing.assert_allclose(got, want.astype(np.float32), atol=1e-6)

    def test_out_of_range_parameters_rejected(self):
        with pytest.raises(ValueError, match="outside allowed range"):
            DegradationConfig(methods={"m": {"noise_sigma": 0.5}})
        with pytest.raises(ValueError, match="outside allowed range"):
            DegradationConfig(low_light={"gamma": 1.2},
                              methods={"m": {"gamma": 1.0}})


# ---------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------

class TestCorpus:
    def test_layout_and_manifest(self, tmp_path, rng):
        bases = [rng.random((40, 40, 3)).astype(np.float32) for _ in range(3)]
        cfg = DegradationConfig(methods={"m1": {"noise_sigma": 0.05},
                                         "m2": {"blur_sigma": 1.0}})
        manifest = generate_degraded_corpus(bases, cfg, 7, tmp_path / "c")
        manifest.validate()
        assert len(manifest.entries) == 3 * (1 + 1 + 2)
        loaded = load_manifest(tmp_path / "c")
        assert loaded.seed == 7
        assert loaded.method_ids() == ["m1", "m2"]
        for e in loaded.entries:
            assert (tmp_path / "c" / e.path).is_file()

    def test_determinism_byte_identical(self, tmp_path, rng):
        bases = [rng.random((32, 32, 3)).astype(np.float32) for _ in range(2)]
        cfg = DegradationConfig(methods={
            "m1": {"noise_sigma": [0.01, 0.06]},
            "m2": {"gamma": [1.0, 1.5], "blur_sigma": [0.2, 1.0]}})
        m1 = generate_degraded_corpus(bases, cfg, 13, tmp_path / "r1")
        m2 = generate_degraded_corpus(bases, cfg, 13, tmp_path / "r2")
        for e1, e2 in zip(m1.entries, m2.entries):
            b1 = (tmp_path / "r1" / e1.path).read_bytes()
            b2 = (tmp_path / "r2" / e2.path).read_bytes()
            assert b1 == b2, e1.path
        assert ((tmp_path / "r1" / "manifest.json").read_bytes()
                == (tmp_path / "r2" / "manifest.json").read_bytes())

    def test_empty_base_set_rejected(self, tmp_path):
        cfg = DegradationConfig(methods={"m": {}})
        with pytest.raises(ValueError, match="empty"):
            generate_degraded_corpus([], cfg, 0, tmp_path / "c")

    def test_manifest_duplicate_detection(self):
        from percept_loop.dataio import CorpusEntry, CorpusManifest
        entries = [
            CorpusEntry("c0", "reference", None, "c0/reference.png", None),
            CorpusEntry("c0", "enhanced", "m", "c0/m.png", None),
            CorpusEntry("c0", "enhanced", "m", "c0/m_again.png", None),
        ]
        with pytest.raises(ValueError, match="duplicate"):
            CorpusManifest(entries, 0).validate()

    def test_manifest_reference_required(self):
        from percept_loop.dataio import CorpusEntry, CorpusManifest
        entries = [CorpusEntry("c0", "enhanced", "m", "c0/m.png", None)]
        with pytest.raises(ValueError, match="no reference"):
            CorpusManifest(entries, 0).validate()


# ---------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------

class TestSplits:
    def _manifest(self, n):
        from percept_loop.dataio import CorpusEntry, CorpusManifest
        entries = []
        for i in range(n):
            cid = f"c{i:03d}"
            entries.append(CorpusEntry(cid, "reference", None,
                                       f"{cid}/reference.png", None))
            entries.append(CorpusEntry(cid, "enhanced", "m",
                                       f"{cid}/m.png", None))
        return CorpusManifest(entries, 0)

    def test_counts(self):
        split = split_by_content(self._manifest(10), 0.2, 3)
        assert len(split.test_content_ids) == 2
        assert len(split.train_content_ids) == 8

    def test_paper_scale_counts(self):
        split = split_by_content(self._manifest(290), 43 / 290, 3)
        assert len(split.test_content_ids) == 43
        assert len(split.train_content_ids) == 247

    def test_deterministic(self):
        m = self._manifest(20)
        a = split_by_content(m, 0.25, 42)
        b = split_by_content(m, 0.25, 42)
        assert a.train_content_ids == b.train_content_ids
        assert a.test_content_ids == b.test_content_ids

    def test_disjoint_over_many_seeds(self):
        m = self._manifest(17)
        for seed in range(100):
            split = split_by_content(m, 0.3, seed)
            assert not (split.train_content_ids & split.test_content_ids)
            assert (split.train_content_ids | split.test_content_ids
                    == set(m.content_ids()))

    def test_empty_side_rejected(self):
        with pytest.raises(ValueError, match="empty side"):
            split_by_content(self._manifest(3), 0.01, 0)

    def test_split_file_roundtrip_sorted(self, tmp_path):
        split = split_by_content(self._manifest(9), 0.3, 5)
        split.save(tmp_path / "split.json")
        payload = json.loads((tmp_path / "split.json").read_text())
        assert payload["train_content_ids"] == sorted(payload["train_content_ids"])
        again = SplitSpec.load(tmp_path / "split.json")
        assert again.test_content_ids == split.test_content_ids


# ---------------------------------------------------------------------
# Crops
# ---------------------------------------------------------------------

class TestCrops:
    def test_exact_size_is_identity(self, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        np.testing.assert_array_equal(crop_patch(img, 16, 0), img)

    def test_offset_bounds(self):
        for seed in range(50):
            top, left = patch_offset(300, 300, 224, seed)
            assert 0 <= top <= 76 and 0 <= left <= 76

    def test_crop_matches_source_slice(self, rng):
        img = rng.random((40, 50, 3)).astype(np.float32)
        for seed in range(10):
            patch = crop_patch(img, 17, seed)
            top, left = patch_offset(40, 50, 17, seed)
            np.testing.assert_array_equal(
                patch, img[top:top + 17, left:left + 17])

    def test_too_small_rejected(self, rng):
        img = rng.random((10, 10, 3)).astype(np.float32)
        with pytest.raises(ValueError, match="smaller than patch"):
            crop_patch(img, 11, 0)
