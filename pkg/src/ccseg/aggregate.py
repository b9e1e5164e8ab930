"""Combining annotation sets: consensus, pseudo confidence contours, exports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import mask as mk
from .mask import CCAnnotation, SegMask, SingularAnnotation
from .metrics import CapacityReport, expected_overflow, expected_underflow


@dataclass(frozen=True, eq=False)
class AnnotationSet:
    """All singular annotations collected for one image."""

    image_id: str
    annotations: list[SingularAnnotation]

    def __post_init__(self):
        if not self.annotations:
            raise ValueError("annotation set must not be empty")
        mk._require_same_dims(*[a.mask for a in self.annotations])

    def __len__(self) -> int:
        return len(self.annotations)

    @property
    def width(self) -> int:
        return self.annotations[0].mask.width

    @property
    def height(self) -> int:
        return self.annotations[0].mask.height


def majority_consensus(s: AnnotationSet, threshold: float = 0.5) -> SegMask:
    """Pixels marked by at least ``threshold`` of the annotators (inclusive)."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    stack = np.stack([a.mask.pixels for a in s.annotations])
    frac = stack.sum(axis=0) / len(s.annotations)
    return SegMask(frac >= threshold)


def pseudo_cc(s: AnnotationSet) -> CCAnnotation:
    """Synthesize a confidence contour from singular annotations.

    The min mask is the intersection of all masks (pixels everyone marked),
    the max mask is their union (pixels anyone marked), so the subset
    invariant holds by construction. One annotation yields min = max.
    """
    stack = np.stack([a.mask.pixels for a in s.annotations])
    return CCAnnotation(min=SegMask(stack.all(axis=0)), max=SegMask(stack.any(axis=0)))


def leave_one_out_capacity(s: AnnotationSet) -> CapacityReport:
    """Internal capacity baseline of a singular annotation set.

    Each member in turn plays the candidate against the remaining members as
    references; the report's terms are the per-fold normalized errors and the
    headline values average over all folds.
    """
    if len(s) < 2:
        raise ValueError("need at least two annotations to hold one out")
    parts = [mk.partition_singular(a) for a in s.annotations]
    terms = []
    for i, cand in enumerate(parts):
        refs = parts[:i] + parts[i + 1 :]
        terms.append(
            (expected_underflow(cand, refs), expected_overflow(cand, refs))
        )
    return CapacityReport.from_terms(terms)


def cc_capacity(cc: CCAnnotation, s: AnnotationSet) -> CapacityReport:
    """Capacity errors of one confidence contour against a singular set.

    One term per reference annotation, each a single-reference evaluation of
    the normalized underflow and overflow.
    """
    cand = mk.partition_cc(cc)
    refs = [mk.partition_singular(a) for a in s.annotations]
    terms = [
        (expected_underflow(cand, [ref]), expected_overflow(cand, [ref]))
        for ref in refs
    ]
    return CapacityReport.from_terms(terms)


@dataclass(frozen=True, eq=False)
class TrainingLabel:
    """Two-channel training target derived from a confidence contour."""

    image_id: str
    min_channel: SegMask
    max_channel: SegMask

    def __post_init__(self):
        if not mk.is_subset(self.min_channel, self.max_channel):
            raise ValueError("min channel must be a subset of max channel")


def export_labels(labels: Sequence[TrainingLabel], out_dir) -> dict:
    """Write training labels as PNG pairs plus a manifest.json.

    All labels are re-validated before anything touches disk, so a violated
    subset invariant rejects the whole batch. Output bytes are deterministic
    for identical input.
    """
    labels = list(labels)
    if not labels:
        raise ValueError("no labels to export")
    ids = [lb.image_id for lb in labels]
    if len(set(ids)) != len(ids):
        raise ValueError("label ids must be unique")
    for lb in labels:
        if not mk.is_subset(lb.min_channel, lb.max_channel):
            raise ValueError(f"label {lb.image_id}: min exceeds max")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for lb in labels:
        min_name = f"{lb.image_id}_min.png"
        max_name = f"{lb.image_id}_max.png"
        mk.save_mask_png(lb.min_channel, out / min_name)
        mk.save_mask_png(lb.max_channel, out / max_name)
        entries.append(
            {
                "id": lb.image_id,
                "width": lb.min_channel.width,
                "height": lb.min_channel.height,
                "min": min_name,
                "max": max_name,
            }
        )
    manifest = {"version": 1, "labels": entries}
    manifest_text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    (out / "manifest.json").write_text(manifest_text, encoding="utf-8")
    return manifest
