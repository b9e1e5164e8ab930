"""Binary raster masks, annotation containers, and three-way partitions."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True, eq=False)
class SegMask:
    """Boolean pixel grid stored row-major, shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("mask must be a 2-D grid with at least one pixel")
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def empty(cls, width: int, height: int) -> "SegMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "SegMask":
        return cls(np.ones((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


def _require_same_dims(*masks: SegMask) -> None:
    shape = masks[0].pixels.shape
    for m in masks[1:]:
        if m.pixels.shape != shape:
            raise ValueError(
                f"mask dimensions differ: {shape[::-1]} vs {m.pixels.shape[::-1]}"
            )


def area(m: SegMask) -> int:
    """Number of set pixels."""
    return int(np.count_nonzero(m.pixels))


def union(a: SegMask, b: SegMask) -> SegMask:
    _require_same_dims(a, b)
    return SegMask(a.pixels | b.pixels)


def intersection(a: SegMask, b: SegMask) -> SegMask:
    _require_same_dims(a, b)
    return SegMask(a.pixels & b.pixels)


def difference(a: SegMask, b: SegMask) -> SegMask:
    """Pixels set in ``a`` but not in ``b``."""
    _require_same_dims(a, b)
    return SegMask(a.pixels & ~b.pixels)


def complement(m: SegMask) -> SegMask:
    return SegMask(~m.pixels)


def is_subset(a: SegMask, b: SegMask) -> bool:
    """True when every set pixel of ``a`` is also set in ``b``."""
    _require_same_dims(a, b)
    return not bool(np.any(a.pixels & ~b.pixels))


def iou(a: SegMask, b: SegMask) -> float:
    """Intersection over union. Undefined (raises) when both masks are empty."""
    _require_same_dims(a, b)
    inter = np.count_nonzero(a.pixels & b.pixels)
    un = np.count_nonzero(a.pixels | b.pixels)
    if un == 0:
        raise ValueError("iou is undefined for two empty masks")
    return float(inter / un)


def dice(a: SegMask, b: SegMask) -> float:
    """Dice coefficient 2|a&b| / (|a|+|b|). Undefined when both masks are empty."""
    _require_same_dims(a, b)
    total = np.count_nonzero(a.pixels) + np.count_nonzero(b.pixels)
    if total == 0:
        raise ValueError("dice is undefined for two empty masks")
    inter = np.count_nonzero(a.pixels & b.pixels)
    return float(2.0 * inter / total)


def composite(m: SegMask, contour, mode: str) -> SegMask:
    """Add or subtract the filled interior of a closed contour.

    ``mode`` is "add" (set union) or "subtract" (set difference). The contour
    is filled with the same even-odd rule used everywhere else, so compositing
    a contour and rasterizing it directly agree pixel for pixel.
    """
    from .geometry import rasterize

    if mode not in ("add", "subtract"):
        raise ValueError(f"unknown composite mode: {mode!r}")
    region = rasterize(contour, m.width, m.height)
    if mode == "add":
        return SegMask(m.pixels | region.pixels)
    return SegMask(m.pixels & ~region.pixels)


@dataclass(frozen=True, eq=False)
class SingularAnnotation:
    """A single-boundary annotation: one mask, no uncertainty channel."""

    mask: SegMask

    def __eq__(self, other) -> bool:
        if not isinstance(other, SingularAnnotation):
            return NotImplemented
        return self.mask == other.mask


@dataclass(frozen=True, eq=False)
class CCAnnotation:
    """Confidence-contour annotation: a certain (min) and a maximal (max) mask.

    The min mask marks pixels the annotator is sure belong to the object; the
    max mask additionally covers everything that plausibly belongs. Every set
    pixel of min must also be set in max; construction fails otherwise.
    """

    min: SegMask
    max: SegMask

    def __post_init__(self):
        _require_same_dims(self.min, self.max)
        if not is_subset(self.min, self.max):
            raise ValueError("min mask must be a subset of max mask")

    def __eq__(self, other) -> bool:
        if not isinstance(other, CCAnnotation):
            return NotImplemented
        return self.min == other.min and self.max == other.max


@dataclass(frozen=True, eq=False)
class Partition:
    """Disjoint, exhaustive split of the grid into positive/uncertain/negative."""

    pos: SegMask
    unc: SegMask
    neg: SegMask

    def __post_init__(self):
        _require_same_dims(self.pos, self.unc, self.neg)
        p, u, n = self.pos.pixels, self.unc.pixels, self.neg.pixels
        if np.any(p & u) or np.any(p & n) or np.any(u & n):
            raise ValueError("partition regions overlap")
        if not np.all(p | u | n):
            raise ValueError("partition regions do not cover the grid")


def partition_cc(a: CCAnnotation) -> Partition:
    """Split a CC annotation: pos = min, unc = max minus min, neg = outside max."""
    return Partition(
        pos=a.min,
        unc=SegMask(a.max.pixels & ~a.min.pixels),
        neg=SegMask(~a.max.pixels),
    )


def partition_singular(a: SingularAnnotation) -> Partition:
    """Split a singular annotation: pos = mask, unc = empty, neg = everything else."""
    m = a.mask
    return Partition(
        pos=m,
        unc=SegMask.empty(m.width, m.height),
        neg=SegMask(~m.pixels),
    )


def save_mask_png(m: SegMask, path) -> None:
    """Write an 8-bit single-channel PNG with 0 for clear and 255 for set."""
    img = Image.fromarray(np.where(m.pixels, 255, 0).astype(np.uint8), mode="L")
    img.save(Path(path), format="PNG")


def load_mask_png(path) -> SegMask:
    """Read a mask PNG; any channel value above 127 counts as set."""
    with Image.open(Path(path)) as img:
        arr = np.asarray(img.convert("L"))
    return SegMask(arr > 127)


def save_cc_pngs(cc: CCAnnotation, directory, stem: str) -> tuple[Path, Path]:
    """Write the mask pair as ``{stem}_min.png`` and ``{stem}_max.png``."""
    directory = Path(directory)
    min_path = directory / f"{stem}_min.png"
    max_path = directory / f"{stem}_max.png"
    save_mask_png(cc.min, min_path)
    save_mask_png(cc.max, max_path)
    return min_path, max_path


def load_cc_pngs(min_path, max_path) -> CCAnnotation:
    return CCAnnotation(min=load_mask_png(min_path), max=load_mask_png(max_path))
