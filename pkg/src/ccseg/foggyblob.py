"""Synthetic fuzzy-boundary blobs with per-structure ground truth.

Each sample is a bright core with dim tapering branches, blurred and noised
so the true extent of a branch is genuinely ambiguous to an annotator. The
core and every branch keep their own ground-truth masks, which lets simulated
annotators of different dispositions disagree in controlled ways.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .geometry import Contour, rasterize
from .mask import CCAnnotation, SegMask, SingularAnnotation, save_mask_png, load_mask_png

_CORE_SAMPLES = 96  # angular resolution of the core outline polygon
_BRANCH_SAMPLES = 9  # centerline resolution of a branch stroke


@dataclass(frozen=True)
class FoggyConfig:
    """Generation parameters. Ranges are inclusive; fractions scale half-size."""

    image_size: int = 128
    core_radius_range: tuple[float, float] = (0.18, 0.30)
    core_perturb_harmonics: int = 5
    core_perturb_amp: float = 0.25
    branch_count_range: tuple[int, int] = (2, 6)
    branch_length_range: tuple[float, float] = (0.2, 0.5)
    branch_width_range: tuple[float, float] = (3.0, 9.0)
    branch_intensity_range: tuple[float, float] = (0.25, 0.75)
    blur_sigma: float = 2.5
    noise_amp: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.image_size < 32:
            raise ValueError("image_size must be at least 32")
        for name in (
            "core_radius_range",
            "branch_count_range",
            "branch_length_range",
            "branch_width_range",
            "branch_intensity_range",
        ):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be ordered low, high")
        if not 0.0 <= self.core_perturb_amp < 1.0:
            raise ValueError("core_perturb_amp must lie in [0, 1)")
        if self.core_perturb_harmonics < 1:
            raise ValueError("need at least one perturbation harmonic")
        if self.branch_count_range[0] < 0:
            raise ValueError("branch count cannot be negative")
        lo, hi = self.branch_intensity_range
        if not (0.0 < lo and hi < 1.0):
            raise ValueError("branch intensities must lie strictly inside (0, 1)")
        if self.blur_sigma <= 0:
            raise ValueError("blur_sigma must be positive")
        if self.noise_amp < 0:
            raise ValueError("noise_amp cannot be negative")


@dataclass(frozen=True, eq=False)
class FoggySample:
    """One rendered image plus its structure-level ground truth."""

    index: int
    image: np.ndarray
    core_mask: SegMask
    branch_masks: list[SegMask]
    branch_intensities: list[float]
    core_radius: float | None = None

    def __post_init__(self):
        if self.image.dtype != np.uint8 or self.image.ndim != 2:
            raise ValueError("image must be a 2-D uint8 array")
        if len(self.branch_masks) != len(self.branch_intensities):
            raise ValueError("one intensity per branch mask")
        if self.image.shape != self.core_mask.pixels.shape:
            raise ValueError("core mask must match image dimensions")
        for bm in self.branch_masks:
            if bm.pixels.shape != self.image.shape:
                raise ValueError("branch masks must match image dimensions")


def _rng_for(seed: int, index: int) -> np.random.Generator:
    if index < 0:
        raise ValueError("index cannot be negative")
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index])
    return np.random.Generator(np.random.PCG64(ss))


def _blur_uint8(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur in pure integer arithmetic.

    Kernel weights are fixed-point (scaled by 2^16 and rounded), both passes
    accumulate in int64, and a single rounding division at the end keeps the
    result bit-identical across platforms.
    """
    radius = max(1, math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.rint(65536.0 * np.exp(-(xs**2) / (2.0 * sigma * sigma))).astype(
        np.int64
    )
    total = int(weights.sum())

    acc = img.astype(np.int64)
    for axis in (0, 1):
        pad = [(0, 0), (0, 0)]
        pad[axis] = (radius, radius)
        padded = np.pad(acc, pad, mode="constant")
        windows = np.lib.stride_tricks.sliding_window_view(
            padded, 2 * radius + 1, axis=axis
        )
        acc = (windows * weights).sum(axis=-1)
    denom = total * total
    return (acc + denom // 2) // denom


def _radius_profile(rng: np.random.Generator, cfg: FoggyConfig, half: float):
    """Draw a perturbed-circle radius function r(theta) for the core."""
    base = rng.uniform(*cfg.core_radius_range) * half
    h = cfg.core_perturb_harmonics
    amps = [rng.uniform(0.0, cfg.core_perturb_amp / h) for _ in range(h)]
    phases = [rng.uniform(0.0, 2.0 * math.pi) for _ in range(h)]

    def radius(theta):
        theta = np.asarray(theta, dtype=np.float64)
        bump = sum(
            a * np.sin((k + 2) * theta + p)
            for k, (a, p) in enumerate(zip(amps, phases))
        )
        return base * (1.0 + bump)

    return base, radius


def _branch_polygon(
    root: np.ndarray, direction: np.ndarray, length: float, width: float, bow: float
) -> Contour:
    """Tapered stroke outline along a gently bowed centerline."""
    perp = np.array([-direction[1], direction[0]])
    t = np.linspace(0.0, 1.0, _BRANCH_SAMPLES)
    centers = (
        root[None, :]
        + direction[None, :] * (t * length)[:, None]
        + perp[None, :] * (bow * np.sin(math.pi * t))[:, None]
    )
    halfw = np.maximum(0.6, (width / 2.0) * (1.0 - 0.85 * t))
    left = centers + perp[None, :] * halfw[:, None]
    right = centers - perp[None, :] * halfw[:, None]
    return Contour(np.vstack([left, right[::-1]]))


def generate_sample(cfg: FoggyConfig, index: int) -> FoggySample:
    """Deterministically build sample ``index``: same config, same bytes.

    Randomness comes from a generator seeded by (config seed, sample index),
    so samples are reproducible individually and independent of generation
    order.
    """
    rng = _rng_for(cfg.seed, index)
    size = cfg.image_size
    half = size / 2.0
    center = np.array([half, half])

    base_radius, radius_fn = _radius_profile(rng, cfg, half)
    theta = np.linspace(0.0, 2.0 * math.pi, _CORE_SAMPLES, endpoint=False)
    r = radius_fn(theta)
    outline = np.stack(
        [center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)], axis=1
    )
    core = rasterize(Contour(outline), size, size)

    count = int(rng.integers(cfg.branch_count_range[0], cfg.branch_count_range[1] + 1))
    branch_masks: list[SegMask] = []
    intensities: list[float] = []
    for _ in range(count):
        angle = rng.uniform(0.0, 2.0 * math.pi)
        length = rng.uniform(*cfg.branch_length_range) * half
        width = rng.uniform(*cfg.branch_width_range)
        intensity = rng.uniform(*cfg.branch_intensity_range)
        bow = rng.uniform(-0.15, 0.15) * length
        direction = np.array([math.cos(angle), math.sin(angle)])
        root = center + direction * (0.85 * float(radius_fn(angle)))
        stroke = rasterize(
            _branch_polygon(root, direction, length, width, bow), size, size
        )
        body = SegMask(stroke.pixels & ~core.pixels)
        if not np.any(body.pixels):
            continue  # branch never left the core; drop it
        branch_masks.append(body)
        intensities.append(float(intensity))

    field = np.zeros((size, size), dtype=np.int64)
    field[core.pixels] = 255
    for bm, level in zip(branch_masks, intensities):
        value = int(round(255.0 * level))
        field[bm.pixels] = np.maximum(field[bm.pixels], value)
    blurred = _blur_uint8(field, cfg.blur_sigma)
    if cfg.noise_amp > 0:
        noise = rng.integers(-cfg.noise_amp, cfg.noise_amp + 1, size=(size, size))
    else:
        noise = np.zeros((size, size), dtype=np.int64)
    image = np.clip(blurred + noise, 0, 255).astype(np.uint8)

    return FoggySample(
        index=index,
        image=image,
        core_mask=core,
        branch_masks=branch_masks,
        branch_intensities=intensities,
        core_radius=base_radius,
    )


def generate_dataset(cfg: FoggyConfig, count: int, out_dir) -> dict:
    """Render ``count`` samples to disk and return the manifest.

    Layout: images/{id}.png, masks/{id}_core.png, masks/{id}_branch{k}.png,
    and manifest.json carrying the config echo plus per-sample paths and
    branch intensities. Repeated runs with the same config produce identical
    bytes.
    """
    if count < 1:
        raise ValueError("need at least one sample")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        sample = generate_sample(cfg, i)
        sid = f"{i:04d}"
        image_rel = f"images/{sid}.png"
        Image.fromarray(sample.image, mode="L").save(out / image_rel, format="PNG")
        core_rel = f"masks/{sid}_core.png"
        save_mask_png(sample.core_mask, out / core_rel)
        branch_rels = []
        for k, bm in enumerate(sample.branch_masks):
            rel = f"masks/{sid}_branch{k}.png"
            save_mask_png(bm, out / rel)
            branch_rels.append(rel)
        entries.append(
            {
                "id": sid,
                "image": image_rel,
                "core_mask": core_rel,
                "branch_masks": branch_rels,
                "branch_intensities": sample.branch_intensities,
            }
        )
    config_doc = {
        k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()
    }
    manifest = {
        "dataset_id": f"foggyblob-s{cfg.seed}-n{count}",
        "config": config_doc,
        "samples": entries,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(text, encoding="utf-8")
    return manifest


def load_manifest(path) -> dict:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("dataset_id", "config", "samples"):
        if key not in manifest:
            raise ValueError(f"manifest is missing {key!r}")
    return manifest


def load_sample(dataset_dir, entry: dict) -> FoggySample:
    """Rebuild a sample from its manifest entry (image plus ground truth)."""
    root = Path(dataset_dir)
    with Image.open(root / entry["image"]) as img:
        image = np.asarray(img.convert("L"), dtype=np.uint8)
    return FoggySample(
        index=int(entry["id"]),
        image=image,
        core_mask=load_mask_png(root / entry["core_mask"]),
        branch_masks=[load_mask_png(root / rel) for rel in entry["branch_masks"]],
        branch_intensities=[float(v) for v in entry["branch_intensities"]],
    )


@dataclass(frozen=True)
class AnnotatorProfile:
    """Disposition of a simulated annotator.

    ``sensitivity`` drives singular annotation: a branch of intensity t is
    included when t >= 1 - sensitivity * u for a per-branch uniform draw u,
    so sensitivity 0 keeps only the core and brighter branches are always the
    more likely to be kept. The thresholds drive confidence contours: min
    takes branches at or above ``high_threshold``, max at or above
    ``low_threshold``. ``boundary_jitter`` grows or shrinks the final masks
    by up to that many pixels.
    """

    seed: int
    sensitivity: float = 0.5
    boundary_jitter: int = 0
    low_threshold: float = 0.3
    high_threshold: float = 0.7

    def __post_init__(self):
        if not 0.0 <= self.sensitivity <= 1.0:
            raise ValueError("sensitivity must lie in [0, 1]")
        if self.boundary_jitter < 0:
            raise ValueError("boundary_jitter cannot be negative")
        if not 0.0 <= self.low_threshold <= self.high_threshold <= 1.0:
            raise ValueError("thresholds must satisfy 0 <= low <= high <= 1")


def _offset_mask(pixels: np.ndarray, offset: int) -> np.ndarray:
    """Uniformly grow (positive) or shrink (negative) a region."""
    if offset == 0:
        return pixels
    structure = np.ones((3, 3), dtype=bool)
    if offset > 0:
        return ndimage.binary_dilation(pixels, structure, iterations=offset)
    return ndimage.binary_erosion(pixels, structure, iterations=-offset)


def simulate_singular(sample: FoggySample, profile: AnnotatorProfile) -> SingularAnnotation:
    """One simulated single-boundary annotation of a sample.

    Deterministic in (sample index, profile seed): the same annotator always
    draws the same mask for the same image.
    """
    rng = _rng_for(profile.seed, sample.index)
    u = rng.random(len(sample.branch_masks))
    pixels = sample.core_mask.pixels.copy()
    for bm, t, ui in zip(sample.branch_masks, sample.branch_intensities, u):
        if t >= 1.0 - profile.sensitivity * ui:
            pixels |= bm.pixels
    if profile.boundary_jitter > 0:
        offset = int(rng.integers(-profile.boundary_jitter, profile.boundary_jitter + 1))
        pixels = _offset_mask(pixels, offset)
    return SingularAnnotation(SegMask(pixels))


def simulate_cc(sample: FoggySample, profile: AnnotatorProfile) -> CCAnnotation:
    """One simulated confidence-contour annotation of a sample.

    The min mask keeps the core plus branches at or above the high threshold,
    the max mask relaxes to the low threshold. Jitter applies the same offset
    to both masks, which preserves the subset invariant.
    """
    rng = _rng_for(profile.seed, sample.index)
    lo_pixels = sample.core_mask.pixels.copy()
    hi_pixels = sample.core_mask.pixels.copy()
    for bm, t in zip(sample.branch_masks, sample.branch_intensities):
        if t >= profile.low_threshold:
            lo_pixels |= bm.pixels
        if t >= profile.high_threshold:
            hi_pixels |= bm.pixels
    if profile.boundary_jitter > 0:
        offset = int(rng.integers(-profile.boundary_jitter, profile.boundary_jitter + 1))
        lo_pixels = _offset_mask(lo_pixels, offset)
        hi_pixels = _offset_mask(hi_pixels, offset)
    return CCAnnotation(min=SegMask(hi_pixels), max=SegMask(lo_pixels))
