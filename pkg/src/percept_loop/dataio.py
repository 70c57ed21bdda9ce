"""Image IO, synthetic degradation corpus, content splits, and patch crops.

A corpus lives in one directory: a ``manifest.json`` plus 8-bit RGB PNG
files. Every content id owns one clean reference image, one low-light
rendition (gamma darkening + noise), and K "pseudo-enhanced" renditions
produced by distinct degradation recipes. Recipe parameters may be given
as scalars or ``[lo, hi]`` ranges; ranges are resolved per content with a
seeded generator, so two runs with the same seed write byte-identical
files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import cv2
import numpy as np

from .validation import check_image, check_fraction, check_seed

MANIFEST_NAME = "manifest.json"
ROLES = ("reference", "low_light", "enhanced")

# Allowed parameter intervals for degradation recipes. The low-light
# rendition must actually darken, hence the tighter gamma floor.
PARAM_BOUNDS = {
    "gamma": (1.0, 4.0),
    "noise_sigma": (0.0, 0.1),
    "blur_sigma": (0.0, 2.0),
    "gain": (0.7, 1.3),
    "contrast": (0.5, 1.5),
    "exposure_offset": (-0.3, 0.3),
}
LOW_LIGHT_GAMMA_BOUNDS = (1.5, 4.0)


# ---------------------------------------------------------------------
# Image files
# ---------------------------------------------------------------------

def load_image(path) -> np.ndarray:
    """Read an 8-bit or 16-bit RGB image file as float32 in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"unsupported or unreadable image file: {path}")
    if raw.ndim != 3 or raw.shape[2] != 3:
        shape = raw.shape if raw.ndim != 2 else (*raw.shape, 1)
        raise ValueError(
            f"{path} must be a 3-channel RGB image, got shape {shape}"
        )
    if raw.dtype == np.uint8:
        maxval = 255.0
    elif raw.dtype == np.uint16:
        maxval = 65535.0
    else:
        raise ValueError(f"{path}: unsupported pixel dtype {raw.dtype}")
    rgb = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    return rgb.astype(np.float32) / maxval


def save_image(path, image: np.ndarray) -> None:
    """Write a [0, 1] float image as an 8-bit RGB PNG (no alpha).

    Quantization rounds half away from zero.
    """
    img = check_image(image)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    u8 = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    ok = cv2.imwrite(str(path), cv2.cvtColor(u8, cv2.COLOR_RGB2BGR))
    if not ok:
        raise IOError(f"failed to write image: {path}")


# ---------------------------------------------------------------------
# Degradation recipes
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class DegradationRecipe:
    """One resolved set of degradation parameters.

    Identity values (gamma 1, sigma 0, unit gains, ...) skip their step,
    so the all-identity recipe reproduces the input bit for bit.
    """

    gamma: float = 1.0
    blur_sigma: float = 0.0
    gains: tuple[float, float, float] = (1.0, 1.0, 1.0)
    contrast: float = 1.0
    exposure_offset: float = 0.0
    noise_sigma: float = 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["gains"] = list(self.gains)
        return d


def _gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect-101 borders, radius 3*sigma."""
    if sigma <= 0:
        return image
    from scipy.ndimage import convolve1d

    k = _gaussian_kernel1d(sigma)
    out = image.astype(np.float64)
    out = convolve1d(out, k, axis=0, mode="mirror")
    out = convolve1d(out, k, axis=1, mode="mirror")
    return out.astype(np.float32)


def apply_recipe(image: np.ndarray, recipe: DegradationRecipe,
                 rng: np.random.Generator) -> np.ndarray:
    """Apply a degradation recipe, clipping to [0, 1] after every step.

    Step order: gamma, blur, per-channel gains, contrast, exposure
    offset, additive Gaussian noise.
    """
    out = check_image(image).copy()
    if recipe.gamma != 1.0:
        out = np.clip(out ** np.float32(recipe.gamma), 0.0, 1.0)
    if recipe.blur_sigma > 0.0:
        out = np.clip(gaussian_blur(out, recipe.blur_sigma), 0.0, 1.0)
    if tuple(recipe.gains) != (1.0, 1.0, 1.0):
        out = np.clip(out * np.asarray(recipe.gains, dtype=np.float32), 0.0, 1.0)
    if recipe.contrast != 1.0:
        out = np.clip((out - 0.5) * np.float32(recipe.contrast) + 0.5, 0.0, 1.0)
    if recipe.exposure_offset != 0.0:
        out = np.clip(out + np.float32(recipe.exposure_offset), 0.0, 1.0)
    if recipe.noise_sigma > 0.0:
        noise = rng.normal(0.0, recipe.noise_sigma, size=out.shape)
        out = np.clip(out + noise.astype(np.float32), 0.0, 1.0)
    return out


def _check_bounds(name: str, value: float, bounds: tuple[float, float]) -> float:
    value = float(value)
    lo, hi = bounds
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside allowed range [{lo}, {hi}]")
    return value


def _resolve(spec_value, name: str, bounds, rng: np.random.Generator) -> float:
    """Resolve a scalar-or-range recipe parameter against its bounds."""
    if isinstance(spec_value, (list, tuple)):
        if len(spec_value) != 2:
            raise ValueError(f"{name} range must be [lo, hi], got {spec_value}")
        lo = _check_bounds(name, spec_value[0], bounds)
        hi = _check_bounds(name, spec_value[1], bounds)
        if hi < lo:
            raise ValueError(f"{name} range is inverted: {spec_value}")
        return float(rng.uniform(lo, hi))
    return _check_bounds(name, spec_value, bounds)


def sample_recipe(spec: dict, rng: np.random.Generator,
                  low_light: bool = False) -> DegradationRecipe:
    """Draw a concrete recipe from a spec of scalars and [lo, hi] ranges."""
    known = {"gamma", "noise_sigma", "blur_sigma", "gains", "contrast",
             "exposure_offset"}
    unknown = set(spec) - known
    if unknown:
        raise ValueError(f"unknown recipe parameters: {sorted(unknown)}")
    gamma_bounds = LOW_LIGHT_GAMMA_BOUNDS if low_light else PARAM_BOUNDS["gamma"]
    gamma = _resolve(spec.get("gamma", gamma_bounds[0] if low_light else 1.0),
                     "gamma", gamma_bounds, rng)
    blur = _resolve(spec.get("blur_sigma", 0.0), "blur_sigma",
                    PARAM_BOUNDS["blur_sigma"], rng)
    gains_spec = spec.get("gains", (1.0, 1.0, 1.0))
    if len(gains_spec) != 3:
        raise ValueError(f"gains must have 3 entries, got {gains_spec}")
    gains = tuple(_resolve(g, "gain", PARAM_BOUNDS["gain"], rng)
                  for g in gains_spec)
    contrast = _resolve(spec.get("contrast", 1.0), "contrast",
                        PARAM_BOUNDS["contrast"], rng)
    offset = _resolve(spec.get("exposure_offset", 0.0), "exposure_offset",
                      PARAM_BOUNDS["exposure_offset"], rng)
    noise = _resolve(spec.get("noise_sigma", 0.0), "noise_sigma",
                     PARAM_BOUNDS["noise_sigma"], rng)
    return DegradationRecipe(gamma=gamma, blur_sigma=blur, gains=gains,
                             contrast=contrast, exposure_offset=offset,
                             noise_sigma=noise)


@dataclass
class DegradationConfig:
    """Recipe specs for the low-light rendition and the pseudo-enhancers."""

    low_light: dict = field(default_factory=lambda: {
        "gamma": [1.8, 3.0], "noise_sigma": [0.01, 0.04]})
    methods: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.methods:
            raise ValueError("config must define at least one method recipe")
        rng = np.random.default_rng(0)
        sample_recipe(self.low_light, rng, low_light=True)
        for mid, spec in self.methods.items():
            if not mid or not isinstance(mid, str):
                raise ValueError(f"invalid method id: {mid!r}")
            sample_recipe(spec, rng)

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationConfig":
        return cls(low_light=d.get("low_light", {"gamma": [1.8, 3.0],
                                                 "noise_sigma": [0.01, 0.04]}),
                   methods=dict(d["methods"]))


def default_degradation_config() -> DegradationConfig:
    """Six-method config spanning noise, blur, exposure, contrast, color."""
    return DegradationConfig(methods={
        "m_faithful": {"gamma": [1.0, 1.05], "noise_sigma": [0.0, 0.01]},
        "m_noisy": {"noise_sigma": [0.04, 0.09]},
        "m_blurry": {"blur_sigma": [0.8, 1.8]},
        "m_dark": {"gamma": [1.3, 1.8], "exposure_offset": [-0.18, -0.08]},
        "m_washed": {"contrast": [0.55, 0.75], "exposure_offset": [0.05, 0.18]},
        "m_tinted": {"gains": [[0.72, 0.85], [1.0, 1.0], [1.1, 1.28]],
                     "noise_sigma": [0.01, 0.03]},
    })


# ---------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------

@dataclass
class CorpusEntry:
    content_id: str
    role: str
    method_id: str | None
    path: str
    degradation_params: dict | None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")


@dataclass
class CorpusManifest:
    entries: list[CorpusEntry]
    seed: int

    def validate(self) -> None:
        keys = set()
        references = set()
        for e in self.entries:
            # reference and low_light both carry method_id None, so the
            # role participates in the uniqueness key.
            key = (e.content_id, e.role, e.method_id)
            if key in keys:
                raise ValueError(f"duplicate manifest entry: {key}")
            keys.add(key)
            if e.role == "reference":
                references.add(e.content_id)
        for e in self.entries:
            if e.role != "reference" and e.content_id not in references:
                raise ValueError(
                    f"{e.role} entry {e.content_id!r} has no reference entry")

    def content_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.content_id, None)
        return list(seen)

    def method_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            if e.role == "enhanced" and e.method_id is not None:
                seen.setdefault(e.method_id, None)
        return list(seen)

    def entry(self, content_id: str, role: str,
              method_id: str | None = None) -> CorpusEntry:
        for e in self.entries:
            if (e.content_id == content_id and e.role == role
                    and (method_id is None or e.method_id == method_id)):
                return e
        raise KeyError(f"no entry ({content_id!r}, {role!r}, {method_id!r})")


def save_manifest(manifest: CorpusManifest, directory) -> Path:
    manifest.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = {
        "seed": manifest.seed,
        "entries": [
            {"content_id": e.content_id, "role": e.role,
             "method_id": e.method_id, "path": e.path,
             "degradation_params": e.degradation_params}
            for e in manifest.entries
        ],
    }
    path = directory / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def load_manifest(directory) -> CorpusManifest:
    directory = Path(directory)
    path = directory if directory.suffix == ".json" else directory / MANIFEST_NAME
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    manifest = CorpusManifest(
        entries=[CorpusEntry(**e) for e in payload["entries"]],
        seed=int(payload["seed"]),
    )
    manifest.validate()
    return manifest


def manifest_dir(manifest_path) -> Path:
    p = Path(manifest_path)
    return p.parent if p.suffix == ".json" else p


# ---------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------

def make_synthetic_reference(height: int, width: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Procedural normal-light reference: smooth color field plus shapes."""
    low_h, low_w = max(2, height // 8), max(2, width // 8)
    base = rng.random((low_h, low_w, 3)).astype(np.float32)
    img = cv2.resize(base, (width, height), interpolation=cv2.INTER_CUBIC)

    ys = np.linspace(0.0, 1.0, height, dtype=np.float32)[:, None, None]
    xs = np.linspace(0.0, 1.0, width, dtype=np.float32)[None, :, None]
    grad_dir = rng.random(3).astype(np.float32)
    img = img + 0.4 * (ys * grad_dir + xs * (1.0 - grad_dir))

    for _ in range(int(rng.integers(3, 7))):
        color = rng.random(3).astype(np.float32)
        cy, cx = rng.integers(0, height), rng.integers(0, width)
        if rng.random() < 0.5:
            h2 = int(rng.integers(height // 8, max(height // 2, height // 8 + 1)))
            w2 = int(rng.integers(width // 8, max(width // 2, width // 8 + 1)))
            img[cy:cy + h2, cx:cx + w2] = (
                0.5 * img[cy:cy + h2, cx:cx + w2] + 0.5 * color)
        else:
            radius = int(rng.integers(min(height, width) // 10 + 1,
                                      min(height, width) // 3 + 2))
            yy, xx = np.ogrid[:height, :width]
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
            img[mask] = 0.5 * img[mask] + 0.5 * color

    img = gaussian_blur(np.clip(img / max(img.max(), 1e-6), 0.0, 1.0), 1.0)
    lo, hi = float(img.min()), float(img.max())
    img = (img - lo) / max(hi - lo, 1e-6)
    return np.clip(0.08 + 0.84 * img, 0.0, 1.0).astype(np.float32)


def generate_degraded_corpus(base_images, config: DegradationConfig,
                             seed, out_dir, content_ids=None) -> CorpusManifest:
    """Write reference/low-light/pseudo-enhanced PNGs plus a manifest.

    Per-entry randomness is keyed on (seed, content index, recipe index),
    so results do not depend on iteration or scheduling order.
    """
    seed = check_seed(seed)
    if not base_images:
        raise ValueError("base image list is empty")
    out_dir = Path(out_dir)
    if content_ids is None:
        content_ids = [f"c{i:04d}" for i in range(len(base_images))]
    if len(content_ids) != len(base_images):
        raise ValueError("content_ids length must match base_images")

    method_ids = list(config.methods)
    entries: list[CorpusEntry] = []
    for ci, (cid, base) in enumerate(zip(content_ids, base_images)):
        base = check_image(base, name=f"base image {cid}")
        ref_rel = f"{cid}/reference.png"
        save_image(out_dir / ref_rel, base)
        entries.append(CorpusEntry(cid, "reference", None, ref_rel, None))

        rng = np.random.default_rng([seed, ci, 0])
        recipe = sample_recipe(config.low_light, rng, low_light=True)
        low = apply_recipe(base, recipe, rng)
        low_rel = f"{cid}/low_light.png"
        save_image(out_dir / low_rel, low)
        entries.append(CorpusEntry(cid, "low_light", None, low_rel,
                                   recipe.as_dict()))

        for mi, mid in enumerate(method_ids, start=1):
            rng = np.random.default_rng([seed, ci, mi])
            recipe = sample_recipe(config.methods[mid], rng)
            degraded = apply_recipe(base, recipe, rng)
            rel = f"{cid}/{mid}.png"
            save_image(out_dir / rel, degraded)
            entries.append(CorpusEntry(cid, "enhanced", mid, rel,
                                       recipe.as_dict()))

    manifest = CorpusManifest(entries=entries, seed=seed)
    save_manifest(manifest, out_dir)
    return manifest


# ---------------------------------------------------------------------
# Splits and crops
# ---------------------------------------------------------------------

@dataclass
class SplitSpec:
    train_content_ids: set[str]
    test_content_ids: set[str]

    def __post_init__(self):
        self.train_content_ids = set(self.train_content_ids)
        self.test_content_ids = set(self.test_content_ids)
        overlap = self.train_content_ids & self.test_content_ids
        if overlap:
            raise ValueError(f"train/test content overlap: {sorted(overlap)}")

    def save(self, path) -> None:
        payload = {
            "train_content_ids": sorted(self.train_content_ids),
            "test_content_ids": sorted(self.test_content_ids),
        }
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "SplitSpec":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        return cls(train_content_ids=set(payload["train_content_ids"]),
                   test_content_ids=set(payload["test_content_ids"]))


def split_by_content(manifest: CorpusManifest, test_fraction: float,
                     seed) -> SplitSpec:
    """Seeded random partition of content ids; entries never straddle."""
    check_fraction(test_fraction, "test_fraction")
    seed = check_seed(seed)
    ids = sorted(manifest.content_ids())
    if not ids:
        raise ValueError("manifest has no entries")
    n_test = int(round(len(ids) * test_fraction))
    if n_test == 0 or n_test == len(ids):
        raise ValueError(
            f"test_fraction={test_fraction} leaves an empty side for "
            f"{len(ids)} contents")
    order = np.random.default_rng(seed).permutation(len(ids))
    test = {ids[i] for i in order[:n_test]}
    train = {ids[i] for i in order[n_test:]}
    return SplitSpec(train_content_ids=train, test_content_ids=test)


def patch_offset(height: int, width: int, size: int, seed) -> tuple[int, int]:
    """Seeded uniform-random top-left corner for a size x size window."""
    if height < size or width < size:
        raise ValueError(
            f"image {height}x{width} smaller than patch size {size}")
    rng = np.random.default_rng(check_seed(seed))
    top = int(rng.integers(0, height - size + 1))
    left = int(rng.integers(0, width - size + 1))
    return top, left


def crop_patch(image: np.ndarray, size: int, seed) -> np.ndarray:
    """Seeded random size x size crop; no padding, no resampling."""
    img = check_image(image)
    if size < 1:
        raise ValueError(f"patch size must be positive, got {size}")
    top, left = patch_offset(img.shape[0], img.shape[1], size, seed)
    return img[top:top + size, left:left + size].copy()
