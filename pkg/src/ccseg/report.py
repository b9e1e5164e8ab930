"""Assembles per-image metrics and dataset-level summaries for a study."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import metrics
from .aggregate import AnnotationSet, cc_capacity, leave_one_out_capacity
from .geometry import boundary
from .mask import CCAnnotation, SingularAnnotation


@dataclass(frozen=True, eq=False)
class ImageAnnotations:
    """Everything collected for one image, grouped by annotation style."""

    image_id: str
    singular: list[SingularAnnotation] = field(default_factory=list)
    ccs: list[CCAnnotation] = field(default_factory=list)


def _test_doc(result: Optional[metrics.TestResult]) -> Optional[dict]:
    if result is None:
        return None
    return {"statistic": result.statistic, "p_value": result.p_value, "n": result.n}


def _try(fn, *args):
    try:
        return fn(*args)
    except ValueError:
        return None


def _mean(values: list) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def image_metrics(item: ImageAnnotations) -> dict:
    """Per-image metric document; fields that lack the data needed are null."""
    doc: dict = {"image_id": item.image_id}
    n_s, n_cc = len(item.singular), len(item.ccs)

    cc_under = cc_over = None
    if n_cc >= 1 and n_s >= 1:
        refs = AnnotationSet(item.image_id, item.singular)
        reports = [cc_capacity(cc, refs) for cc in item.ccs]
        cc_under = float(np.mean([r.expected_underflow for r in reports]))
        cc_over = float(np.mean([r.expected_overflow for r in reports]))
    base_under = base_over = None
    if n_s >= 2:
        base = leave_one_out_capacity(AnnotationSet(item.image_id, item.singular))
        base_under = base.expected_underflow
        base_over = base.expected_overflow
    doc["expected_underflow"] = {"cc": cc_under, "base": base_under}
    doc["expected_overflow"] = {"cc": cc_over, "base": base_over}

    doc["uncertain_area"] = (
        float(np.mean([metrics.uncertain_area(cc) for cc in item.ccs]))
        if n_cc
        else None
    )
    doc["ensemble_spread"] = (
        metrics.ensemble_spread(item.singular) if n_s >= 2 else None
    )

    def _disagreement(masks) -> Optional[float]:
        nonempty = [m for m in masks if np.any(m.pixels)]
        if len(nonempty) < 2:
            return None
        return _try(metrics.disagreement, [boundary(m) for m in nonempty])

    doc["disagreement"] = {
        "singular": _disagreement([a.mask for a in item.singular]),
        "min": _disagreement([cc.min for cc in item.ccs]),
        "max": _disagreement([cc.max for cc in item.ccs]),
    }
    return doc


def _paired(images: list[dict], pick_x, pick_y) -> Optional[metrics.TestResult]:
    xs, ys = [], []
    for doc in images:
        x, y = pick_x(doc), pick_y(doc)
        if x is not None and y is not None:
            xs.append(x)
            ys.append(y)
    if len(xs) < 2:
        return None
    return _try(metrics.paired_t_test, xs, ys)


def dataset_report(items: Sequence[ImageAnnotations]) -> dict:
    """Dataset-level report: per-image docs plus cross-image statistics.

    Identical input always yields an identical document; images are ordered
    by id and every statistic that cannot be computed from the data present
    is null rather than fabricated.
    """
    items = sorted(items, key=lambda it: it.image_id)
    images = [image_metrics(it) for it in items]

    summary: dict = {
        "n_images": len(images),
        "mean_expected_underflow": {
            "cc": _mean([d["expected_underflow"]["cc"] for d in images]),
            "base": _mean([d["expected_underflow"]["base"] for d in images]),
        },
        "mean_expected_overflow": {
            "cc": _mean([d["expected_overflow"]["cc"] for d in images]),
            "base": _mean([d["expected_overflow"]["base"] for d in images]),
        },
        "mean_disagreement": {
            key: _mean([d["disagreement"][key] for d in images])
            for key in ("singular", "min", "max")
        },
    }

    summary["capacity_tests"] = {
        "underflow_cc_vs_base": _test_doc(
            _paired(
                images,
                lambda d: d["expected_underflow"]["cc"],
                lambda d: d["expected_underflow"]["base"],
            )
        ),
        "overflow_cc_vs_base": _test_doc(
            _paired(
                images,
                lambda d: d["expected_overflow"]["cc"],
                lambda d: d["expected_overflow"]["base"],
            )
        ),
    }
    summary["disagreement_tests"] = {
        "min_vs_singular": _test_doc(
            _paired(
                images,
                lambda d: d["disagreement"]["min"],
                lambda d: d["disagreement"]["singular"],
            )
        ),
        "max_vs_singular": _test_doc(
            _paired(
                images,
                lambda d: d["disagreement"]["max"],
                lambda d: d["disagreement"]["singular"],
            )
        ),
    }

    pairs = [
        (d["uncertain_area"], d["ensemble_spread"])
        for d in images
        if d["uncertain_area"] is not None and d["ensemble_spread"] is not None
    ]
    corr = None
    if len(pairs) >= 3:
        corr = _try(
            metrics.spearman, [p[0] for p in pairs], [p[1] for p in pairs]
        )
    summary["uncertainty_correlation"] = _test_doc(corr)

    return {"images": images, "summary": summary}
