"""Watershed over-segmentation and the oriented watershed transform (OWT)."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .partition import (
    PartitionError,
    SparseBoundaries,
    _group_means,
    canonical_labels,
    edgel_pixels,
    pixel_components,
)
from .simplify import douglas_peucker

DEFAULT_BINS = 8
DEFAULT_EPSILON = 3.0


def watershed_oversegment(strength) -> np.ndarray:
    """Catchment basins of a 2-D strength map by priority flooding.

    Every plateau that is a regional minimum seeds one basin.  Pixels are
    claimed by the first basin that reaches them; the flood front is ordered
    by (value, row, col).
    """
    s = np.asarray(strength, dtype=np.float64)
    if s.ndim == 3 and s.shape[0] == 1:
        s = s[0]
    if s.ndim != 2 or s.size == 0:
        raise PartitionError(f"strength map must be a non-empty 2-D array, got {s.shape}")
    h, w = s.shape
    n_plateaus, plateau = pixel_components(s[:, :-1] == s[:, 1:], s[:-1, :] == s[1:, :])

    lower = np.zeros((h, w), dtype=bool)
    lower[:, 1:] |= s[:, :-1] < s[:, 1:]
    lower[:, :-1] |= s[:, 1:] < s[:, :-1]
    lower[1:, :] |= s[:-1, :] < s[1:, :]
    lower[:-1, :] |= s[1:, :] < s[:-1, :]
    not_minimum = np.bincount(plateau.ravel(), weights=lower.ravel(), minlength=n_plateaus) > 0

    seed_of = np.full(n_plateaus, -1, dtype=np.int64)
    minima = np.flatnonzero(~not_minimum)
    seed_of[minima] = np.arange(len(minima))  # plateau ids are canonical already

    flat = s.ravel()
    labels = seed_of[plateau.ravel()]
    # integer ranks of (value, raster index) make heap comparisons cheap
    order = np.lexsort((np.arange(flat.size), flat))
    rank = np.empty(flat.size, dtype=np.int64)
    rank[order] = np.arange(flat.size)
    heap = rank[labels >= 0].tolist()
    heapq.heapify(heap)
    labels = labels.tolist()
    rank = rank.tolist()
    order = order.tolist()
    while heap:
        i = order[heapq.heappop(heap)]
        r, c = divmod(i, w)
        lab = labels[i]
        for j in (i - w if r > 0 else -1, i - 1 if c > 0 else -1,
                  i + 1 if c < w - 1 else -1, i + w if r < h - 1 else -1):
            if j >= 0 and labels[j] < 0:
                labels[j] = lab
                heapq.heappush(heap, rank[j])
    return canonical_labels(np.array(labels, dtype=np.int64).reshape(h, w))


def quantize_orientation(theta, bins: int = DEFAULT_BINS):
    """Map angles (radians, any range, mod pi) to bins centred on ``k*pi/bins``."""
    width = math.pi / bins
    return (np.floor((np.mod(theta, math.pi) + width / 2) / width).astype(np.int64)) % bins


def bin_angle(k, bins: int = DEFAULT_BINS):
    return np.asarray(k) * math.pi / bins


def _edgel_endpoints(r: int, c: int) -> tuple[tuple[int, int], tuple[int, int]]:
    if r % 2 == 0:  # vertical edgel between horizontally adjacent pixels
        return (r - 1, c), (r + 1, c)
    return (r, c - 1), (r, c + 1)


def chain_edgels(coords: np.ndarray) -> list[tuple[list[tuple[int, int]], list[int]]]:
    """Decompose an arc into trails of junction points.

    Each trail is ``(points, edgel_indices)`` where edgel ``edgel_indices[i]``
    joins ``points[i]`` and ``points[i+1]``.  The decomposition only depends
    on the coordinate set: trails start at the smallest junction whose degree
    is not 2, and closed loops at their smallest junction.
    """
    cl = np.asarray(coords).tolist()
    ends = [_edgel_endpoints(r, c) for r, c in cl]
    incident: dict[tuple[int, int], list[int]] = {}
    # visiting edgels in coordinate order keeps every incidence list sorted
    for k in sorted(range(len(cl)), key=cl.__getitem__):
        p, q = ends[k]
        incident.setdefault(p, []).append(k)
        incident.setdefault(q, []).append(k)
    used = [False] * len(ends)
    trails = []

    def walk(start):
        points, edges = [start], []
        cur = start
        while True:
            nxt = next((k for k in incident[cur] if not used[k]), None)
            if nxt is None:
                return points, edges
            used[nxt] = True
            p, q = ends[nxt]
            cur = q if p == cur else p
            points.append(cur)
            edges.append(nxt)

    for pt in sorted(p for p, lst in incident.items() if len(lst) != 2):
        while any(not used[k] for k in incident[pt]):
            trails.append(walk(pt))
    for pt in sorted(incident):
        while any(not used[k] for k in incident[pt]):
            trails.append(walk(pt))
    return trails


def _segment_angle(p, q) -> float:
    # grid rows point down; angles are counter-clockwise from the x axis
    return math.atan2(-(q[0] - p[0]), q[1] - p[1]) % math.pi


def trail_orientations(points, epsilon_grid: float) -> tuple[list[float], list[float]]:
    """Per-edge tangent angle and simplified segment length along one trail."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts) - 1
    closed = n > 1 and points[0] == points[-1]
    if closed:
        d = np.hypot(*(pts - pts[0]).T)
        far = int(np.argmax(d))
        keep = douglas_peucker(pts[: far + 1], epsilon_grid)
        keep += [far + k for k in douglas_peucker(pts[far:], epsilon_grid)[1:]]
    else:
        keep = douglas_peucker(pts, epsilon_grid)
    angles = [0.0] * n
    lengths = [0.0] * n
    for i0, i1 in zip(keep[:-1], keep[1:]):
        theta = _segment_angle(points[i0], points[i1])
        length = float(np.hypot(*(pts[i1] - pts[i0]))) / 2.0
        for k in range(i0, i1):
            angles[k] = theta
            lengths[k] = length
    return angles, lengths


@dataclass
class ArcOrientation:
    angles: np.ndarray     # tangent angle per edgel, aligned with the entry's coords
    bins: np.ndarray
    seg_lengths: np.ndarray  # length (pixels) of the simplified segment covering each edgel


@dataclass
class ArcGeometry:
    bins_count: int
    arcs: dict[tuple[int, int], ArcOrientation]


def orient_arc(coords: np.ndarray, epsilon: float, bins: int = DEFAULT_BINS) -> ArcOrientation:
    """Tangent orientation of every edgel of one arc after polygon simplification."""
    n = len(coords)
    angles = np.zeros(n)
    lengths = np.zeros(n)
    for points, edges in chain_edgels(coords):
        a, ln = trail_orientations(points, 2.0 * epsilon)
        angles[edges] = a
        lengths[edges] = ln
    return ArcOrientation(angles, quantize_orientation(angles, bins), lengths)


def arc_orientations(sb: SparseBoundaries, epsilon: float = DEFAULT_EPSILON,
                     bins: int = DEFAULT_BINS) -> ArcGeometry:
    """Quantized local orientation of every edgel of every arc.

    Each arc is chained, simplified with Douglas-Peucker at tolerance
    ``epsilon`` pixels, and each edgel takes the tangent of its segment.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return ArcGeometry(bins, {k: orient_arc(e.coords, epsilon, bins) for k, e in sb.entries.items()})


def channel_for(bins: np.ndarray, k: int, convention: str = "tangent") -> np.ndarray:
    if convention == "tangent":
        return bins
    if convention == "normal":
        return (bins + k // 2) % k
    raise ValueError(f"unknown orientation convention {convention!r}")


def validate_stack(stack, shape) -> np.ndarray:
    st = np.asarray(stack, dtype=np.float64)
    if st.ndim != 3 or st.shape[0] < 2:
        raise PartitionError(f"oriented stack must be (K>=2, H, W), got {st.shape}")
    if st.shape[1:] != tuple(shape):
        raise PartitionError(f"oriented stack is {st.shape[1:]}, image is {tuple(shape)}")
    return st


def edgel_responses(coords: np.ndarray, bins: np.ndarray, stack: np.ndarray,
                    convention: str = "tangent") -> np.ndarray:
    """Oriented response at each edgel: mean of its two pixels in the matching channel."""
    ch = channel_for(bins, stack.shape[0], convention)
    p, q = edgel_pixels(coords)
    return 0.5 * (stack[ch, p[:, 0], p[:, 1]] + stack[ch, q[:, 0], q[:, 1]])


def owt_reweight(sb: SparseBoundaries, geom: ArcGeometry, stack,
                 convention: str = "tangent") -> SparseBoundaries:
    """Replace each arc strength by its mean orientation-matched response.

    Geometry is untouched; a new table sharing the coordinate arrays is
    returned.
    """
    st = validate_stack(stack, sb.shape)
    if st.shape[0] != geom.bins_count:
        raise PartitionError(f"stack has {st.shape[0]} channels, geometry uses {geom.bins_count} bins")
    keys = sb.pairs()
    if set(keys) != set(geom.arcs):
        raise PartitionError("arc geometry does not cover the boundary table")
    if not keys:
        return sb.with_strengths({})
    coords = np.concatenate([sb.entries[k].coords for k in keys])
    bins = np.concatenate([geom.arcs[k].bins for k in keys])
    for k in keys:
        if len(geom.arcs[k].bins) != len(sb.entries[k]):
            raise PartitionError(f"arc geometry of {k} does not match its edgel count")
    values = edgel_responses(coords, bins, st, convention)
    starts = np.cumsum([0] + [len(sb.entries[k]) for k in keys[:-1]])
    means = np.clip(_group_means(values, starts), 0.0, 1.0)
    return sb.with_strengths(dict(zip(keys, means.tolist())))
