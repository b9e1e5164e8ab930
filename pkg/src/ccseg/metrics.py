"""Agreement and capacity metrics for comparing annotations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .geometry import Contour, canonicalize, discrete_frechet, longest_chord
from .mask import CCAnnotation, Partition, SingularAnnotation, _require_same_dims


class DegenerateSamplesError(ValueError):
    """Raised when a statistic exists but its sampling distribution collapses."""


def underflow(a: Partition, b: Partition) -> int:
    """Pixels marked positive by ``a`` that ``b`` does not mark positive.

    Counts certain foreground in ``a`` that falls into the uncertain or
    negative region of ``b``: the amount of ``a``'s commitment that ``b``
    fails to cover.
    """
    _require_same_dims(a.pos, b.pos)
    return int(np.count_nonzero(a.pos.pixels & ~b.pos.pixels))


def overflow(a: Partition, b: Partition) -> int:
    """Pixels marked negative by ``a`` that ``b`` does not mark negative."""
    _require_same_dims(a.neg, b.neg)
    return int(np.count_nonzero(a.neg.pixels & ~b.neg.pixels))


def _positive_union(a: Partition, b: Partition) -> int:
    return int(np.count_nonzero(a.pos.pixels | b.pos.pixels))


def _nonnegative_union(a: Partition, b: Partition) -> int:
    # The complement of a negative region is that annotation's pos plus unc.
    return int(np.count_nonzero(~a.neg.pixels | ~b.neg.pixels))


def expected_underflow(a: Partition, refs: Sequence[Partition]) -> float:
    """Mean normalized underflow of ``a`` against a set of reference partitions.

    Each reference contributes underflow divided by the union of the two
    positive regions; a term with an empty union contributes zero. The result
    lies in [0, 1].
    """
    refs = list(refs)
    if not refs:
        raise ValueError("need at least one reference partition")
    terms = []
    for s in refs:
        denom = _positive_union(a, s)
        terms.append(underflow(a, s) / denom if denom else 0.0)
    return float(np.mean(terms))


def expected_overflow(a: Partition, refs: Sequence[Partition]) -> float:
    """Mean normalized overflow of ``a`` against a set of reference partitions."""
    refs = list(refs)
    if not refs:
        raise ValueError("need at least one reference partition")
    terms = []
    for s in refs:
        denom = _nonnegative_union(a, s)
        terms.append(overflow(a, s) / denom if denom else 0.0)
    return float(np.mean(terms))


def uncertain_area(a: CCAnnotation) -> int:
    """Pixel count of the band between the min and max masks."""
    return int(np.count_nonzero(a.max.pixels & ~a.min.pixels))


def ensemble_spread(annotations: Sequence[SingularAnnotation]) -> int:
    """Pixels covered by some but not all annotations in the set."""
    masks = [a.mask for a in annotations]
    if not masks:
        raise ValueError("need at least one annotation")
    _require_same_dims(*masks)
    stack = np.stack([m.pixels for m in masks])
    return int(np.count_nonzero(stack.any(axis=0) & ~stack.all(axis=0)))


def disagreement(contours: Sequence[Contour]) -> float:
    """Scale-free boundary disagreement across a set of closed contours.

    Contours are canonicalized (clockwise, shared start rule) so the curve
    distance reflects shape rather than traversal bookkeeping. The score is
    the mean pairwise discrete Fréchet distance divided by the mean longest
    chord of the set, so congruent sets score equally at any scale.
    """
    contours = list(contours)
    if len(contours) < 2:
        raise ValueError("need at least two contours")
    canon = [canonicalize(c) for c in contours]
    chords = [longest_chord(c) for c in canon]
    mean_chord = float(np.mean(chords))
    if mean_chord <= 0.0:
        raise ValueError("degenerate contour set: zero mean chord")
    dists = [
        discrete_frechet(canon[i], canon[j])
        for i in range(len(canon))
        for j in range(i + 1, len(canon))
    ]
    return float(np.mean(dists) / mean_chord)


@dataclass(frozen=True)
class TestResult:
    """Outcome of a significance test."""

    __test__ = False  # keep pytest from collecting this as a test case

    statistic: float
    p_value: float
    n: int


def paired_t_test(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Two-sided paired t test on matched samples.

    All-zero differences yield t = 0, p = 1. Nonzero differences with zero
    variance have no finite t statistic and raise DegenerateSamplesError.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("samples must be two equal-length 1-D sequences")
    n = len(x)
    if n < 2:
        raise ValueError("need at least two pairs")
    d = x - y
    if np.all(d == 0):
        return TestResult(statistic=0.0, p_value=1.0, n=n)
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        raise DegenerateSamplesError("differences are constant and nonzero")
    t = float(d.mean()) / (sd / np.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return TestResult(statistic=float(t), p_value=min(p, 1.0), n=n)


def spearman(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Spearman rank correlation with average ranks for ties.

    The p value uses the t approximation on n - 2 degrees of freedom;
    perfectly monotone samples report p = 0. Fewer than three pairs or a
    constant sample leave the correlation undefined and raise ValueError.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("samples must be two equal-length 1-D sequences")
    n = len(x)
    if n < 3:
        raise ValueError("need at least three pairs")
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise ValueError("correlation is undefined for a constant sample")
    rho = float(np.corrcoef(rx, ry)[0, 1])
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return TestResult(statistic=rho, p_value=0.0, n=n)
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    return TestResult(statistic=rho, p_value=min(p, 1.0), n=n)


@dataclass(frozen=True)
class CapacityReport:
    """Normalized capacity errors of one annotation against a reference set.

    ``per_reference_terms`` holds one (underflow, overflow) pair per
    reference; the headline numbers are their means and every term sits in
    [0, 1].
    """

    expected_underflow: float
    expected_overflow: float
    per_reference_terms: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        for u, o in self.per_reference_terms:
            if not (0.0 <= u <= 1.0 and 0.0 <= o <= 1.0):
                raise ValueError("capacity terms must lie in [0, 1]")
        if self.per_reference_terms:
            mu = float(np.mean([t[0] for t in self.per_reference_terms]))
            mo = float(np.mean([t[1] for t in self.per_reference_terms]))
            if abs(mu - self.expected_underflow) > 1e-9 or abs(
                mo - self.expected_overflow
            ) > 1e-9:
                raise ValueError("headline values must be means of the terms")

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[float, float]]) -> "CapacityReport":
        terms = [(float(u), float(o)) for u, o in terms]
        if not terms:
            raise ValueError("need at least one term")
        return cls(
            expected_underflow=float(np.mean([t[0] for t in terms])),
            expected_overflow=float(np.mean([t[1] for t in terms])),
            per_reference_terms=terms,
        )
