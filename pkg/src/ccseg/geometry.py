"""Polyline geometry: curve distance, rasterization, and boundary extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .mask import SegMask


def _as_vertices(points) -> np.ndarray:
    if isinstance(points, (Polyline, Contour)):
        return points.vertices
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError("expected a non-empty (n, 2) sequence of (x, y) points")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vertex coordinates must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Polyline:
    """Open chain of (x, y) vertices in pixel coordinates."""

    vertices: np.ndarray

    def __post_init__(self):
        arr = _as_vertices(self.vertices).copy()
        if len(arr) > 1 and np.any(np.all(arr[1:] == arr[:-1], axis=1)):
            raise ValueError("consecutive vertices must be distinct")
        arr.setflags(write=False)
        object.__setattr__(self, "vertices", arr)

    def __len__(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed polygon boundary; the last vertex connects back to the first.

    Coordinates follow image convention: x grows rightward, y grows downward.
    At least three vertices, no consecutive duplicates (including the wrap
    from last back to first).
    """

    vertices: np.ndarray

    def __post_init__(self):
        arr = _as_vertices(self.vertices).copy()
        if len(arr) < 3:
            raise ValueError("contour needs at least three vertices")
        closed = np.vstack([arr, arr[:1]])
        if np.any(np.all(closed[1:] == closed[:-1], axis=1)):
            raise ValueError("consecutive vertices must be distinct")
        arr.setflags(write=False)
        object.__setattr__(self, "vertices", arr)

    def __len__(self) -> int:
        return len(self.vertices)


def discrete_frechet(a, b) -> float:
    """Discrete Fréchet distance between two vertex chains.

    Dynamic program over monotone couplings: dp[i, j] is the cheapest maximal
    pair distance over couplings of the first i+1 and j+1 vertices, filled
    antidiagonal by antidiagonal so the inner work stays vectorized.
    """
    p = _as_vertices(a)
    q = _as_vertices(b)
    d = np.sqrt(((p[:, None, :] - q[None, :, :]) ** 2).sum(axis=2))
    n, m = d.shape
    if n == 1 or m == 1:
        return float(d.max())
    dp = np.empty((n, m), dtype=np.float64)
    dp[0, :] = np.maximum.accumulate(d[0, :])
    dp[:, 0] = np.maximum.accumulate(d[:, 0])
    for s in range(2, n + m - 1):
        lo = max(1, s - (m - 1))
        hi = min(n - 1, s - 1)
        if lo > hi:
            continue
        i = np.arange(lo, hi + 1)
        j = s - i
        best = np.minimum(
            np.minimum(dp[i - 1, j], dp[i, j - 1]), dp[i - 1, j - 1]
        )
        dp[i, j] = np.maximum(d[i, j], best)
    return float(dp[n - 1, m - 1])


def longest_chord(points) -> float:
    """Largest pairwise Euclidean distance among the points."""
    pts = _as_vertices(points)
    if len(pts) == 1:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff**2).sum(axis=2)).max())


def rasterize(contour, width: int, height: int) -> SegMask:
    """Fill a closed contour on a pixel grid with the even-odd rule.

    A pixel (i, j) is set when its center (i + 0.5, j + 0.5) lies inside the
    polygon. Scanlines run through pixel-row centers; crossings are collected
    for edges that straddle the scanline (half-open in y, so a vertex exactly
    on the line is counted once), paired off, and each [enter, exit) span is
    filled left-closed.
    """
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be positive")
    verts = _as_vertices(contour)
    if len(verts) < 3:
        raise ValueError("contour needs at least three vertices")
    pixels = np.zeros((height, width), dtype=bool)
    x0 = verts[:, 0]
    y0 = verts[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)
    ymin = max(0, int(math.floor(y0.min() - 0.5)))
    ymax = min(height - 1, int(math.ceil(y0.max())))
    for row in range(ymin, ymax + 1):
        y = row + 0.5
        straddles = (y0 > y) != (y1 > y)
        if not straddles.any():
            continue
        t = (y - y0[straddles]) / (y1[straddles] - y0[straddles])
        xs = np.sort(x0[straddles] + t * (x1[straddles] - x0[straddles]))
        for k in range(0, len(xs) - 1, 2):
            first = math.ceil(xs[k] - 0.5)
            last = math.ceil(xs[k + 1] - 0.5) - 1
            lo = max(first, 0)
            hi = min(last, width - 1)
            if lo <= hi:
                pixels[row, lo : hi + 1] = True
    return SegMask(pixels)


# Moore neighborhood in clockwise order for y-down coordinates, starting west.
_MOORE = (
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
)
_MOORE_INDEX = {off: k for k, off in enumerate(_MOORE)}


def _trace_moore(grid: np.ndarray) -> list[tuple[int, int]]:
    """Clockwise Moore-neighbor trace of one 8-connected component.

    Starts at the first set pixel in row-major order (its west neighbor is
    guaranteed background) and walks until the (pixel, entry-direction) state
    repeats, which closes the cycle even for one-pixel-wide spurs.
    """
    rows, cols = np.nonzero(grid)
    start = (int(rows[0]), int(cols[0]))
    h, w = grid.shape

    trace = [start]
    cur = start
    back = 0  # index into _MOORE of the last known background neighbor
    seen = {(cur, back)}
    while True:
        nxt = None
        for step in range(1, 9):
            k = (back + step) % 8
            r = cur[0] + _MOORE[k][0]
            c = cur[1] + _MOORE[k][1]
            if 0 <= r < h and 0 <= c < w and grid[r, c]:
                prev = (back + step - 1) % 8
                bg = (cur[0] + _MOORE[prev][0], cur[1] + _MOORE[prev][1])
                nxt = (r, c)
                back = _MOORE_INDEX[(bg[0] - r, bg[1] - c)]
                break
        if nxt is None:
            return trace  # isolated pixel
        cur = nxt
        state = (cur, back)
        if state in seen:
            return trace
        seen.add(state)
        trace.append(cur)


def boundary(m: SegMask) -> Contour:
    """Outer boundary of the largest 8-connected component, as pixel centers.

    Traversal is clockwise in image coordinates and starts at the first
    boundary pixel in row-major order. Components too small to form a closed
    chain (one or two pixels) fall back to their bounding-box rectangle.
    """
    if not np.any(m.pixels):
        raise ValueError("cannot trace the boundary of an empty mask")
    labels, count = ndimage.label(m.pixels, structure=np.ones((3, 3), dtype=int))
    if count > 1:
        sizes = ndimage.sum_labels(np.ones_like(labels), labels, range(1, count + 1))
        grid = labels == (int(np.argmax(sizes)) + 1)
    else:
        grid = labels > 0
    trace = _trace_moore(grid)
    if len(trace) > 1 and trace[-1] == trace[0]:
        trace = trace[:-1]  # tiny components close back onto the start pixel
    if len(trace) < 3:
        rows, cols = np.nonzero(grid)
        x0, x1 = int(cols.min()), int(cols.max()) + 1
        y0, y1 = int(rows.min()), int(rows.max()) + 1
        return Contour([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    centers = [(c + 0.5, r + 0.5) for r, c in trace]
    return Contour(centers)


def canonicalize(c: Contour) -> Contour:
    """Rewrite a contour in canonical form: clockwise, fixed start vertex.

    Orientation uses the shoelace sum; in y-down coordinates a positive sum
    means the traversal already runs clockwise on screen. The start is rotated
    to the lexicographically smallest (y, x) vertex, first occurrence on ties,
    so repeated canonicalization is a no-op.
    """
    v = np.array(c.vertices)
    x = v[:, 0]
    y = v[:, 1]
    area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if area2 < 0:
        v = v[::-1]
    order = np.lexsort((v[:, 0], v[:, 1]))
    k = int(order[0])
    return Contour(np.roll(v, -k, axis=0))
