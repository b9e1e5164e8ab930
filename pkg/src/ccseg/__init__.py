"""Confidence-contour segmentation annotation toolkit.

Core vocabulary: a singular annotation is one binary mask; a confidence
contour pairs a certain (min) mask with a maximal (max) mask, min within max.
The package covers geometry primitives, agreement and capacity metrics,
ensemble aggregation, synthetic data with ground truth, durable study
storage, and an HTTP annotation service.
"""

from .aggregate import (
    AnnotationSet,
    TrainingLabel,
    cc_capacity,
    export_labels,
    leave_one_out_capacity,
    majority_consensus,
    pseudo_cc,
)
from .foggyblob import (
    AnnotatorProfile,
    FoggyConfig,
    FoggySample,
    generate_dataset,
    generate_sample,
    simulate_cc,
    simulate_singular,
)
from .geometry import (
    Contour,
    Polyline,
    boundary,
    canonicalize,
    discrete_frechet,
    longest_chord,
    rasterize,
)
from .mask import (
    CCAnnotation,
    Partition,
    SegMask,
    SingularAnnotation,
    composite,
    dice,
    iou,
    load_mask_png,
    partition_cc,
    partition_singular,
    save_mask_png,
)
from .metrics import (
    CapacityReport,
    TestResult,
    disagreement,
    ensemble_spread,
    expected_overflow,
    expected_underflow,
    overflow,
    paired_t_test,
    spearman,
    uncertain_area,
    underflow,
)
from .store import Store, StoreCorruptedError

__version__ = "0.1.0"

__all__ = [
    "AnnotationSet",
    "AnnotatorProfile",
    "CapacityReport",
    "CCAnnotation",
    "Contour",
    "FoggyConfig",
    "FoggySample",
    "Partition",
    "Polyline",
    "SegMask",
    "SingularAnnotation",
    "Store",
    "StoreCorruptedError",
    "TestResult",
    "TrainingLabel",
    "boundary",
    "canonicalize",
    "cc_capacity",
    "composite",
    "dice",
    "disagreement",
    "discrete_frechet",
    "ensemble_spread",
    "expected_overflow",
    "expected_underflow",
    "export_labels",
    "generate_dataset",
    "generate_sample",
    "iou",
    "leave_one_out_capacity",
    "load_mask_png",
    "longest_chord",
    "majority_consensus",
    "overflow",
    "paired_t_test",
    "partition_cc",
    "partition_singular",
    "pseudo_cc",
    "rasterize",
    "save_mask_png",
    "simulate_cc",
    "simulate_singular",
    "spearman",
    "uncertain_area",
    "underflow",
]
