"""Projection of coarse hierarchies onto a fine partition and their fusion."""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from .hierarchy import Hierarchy, build_ucm, edgel_levels
from .partition import PartitionError, SparseBoundaries, _group_means

RADIUS_FRACTION = 0.0075


def default_radius(shape) -> float:
    """Projection radius in pixels: the benchmark's localization tolerance."""
    return RADIUS_FRACTION * math.hypot(*shape)


def project(coarse: Hierarchy, fine_sb: SparseBoundaries, radius: float | None = None) -> dict:
    """Per-entry strengths of ``fine_sb`` read from a coarse hierarchy.

    Each fine edgel takes the ultrametric level of the nearest boundary edgel
    of the coarse hierarchy within ``radius`` pixels (0 when there is none);
    an entry's strength is the mean over its edgels.
    """
    if coarse.shape != fine_sb.shape:
        raise PartitionError(f"coarse hierarchy is {coarse.shape}, fine boundaries are {fine_sb.shape}")
    if radius is None:
        radius = default_radius(fine_sb.shape)
    keys = fine_sb.pairs()
    if not keys:
        return {}
    levels = edgel_levels(coarse)
    if levels.entries:
        src = np.concatenate([e.coords for e in levels.entries.values()]) / 2.0
        vals = np.concatenate([np.full(len(e), e.strength) for e in levels.entries.values()])
    else:
        src = np.zeros((0, 2))
        vals = np.zeros(0)
    dst = np.concatenate([fine_sb.entries[k].coords for k in keys]) / 2.0
    per_edgel = np.zeros(len(dst))
    if len(src):
        dist, idx = cKDTree(src).query(dst, k=1, distance_upper_bound=radius * (1 + 1e-12))
        hit = np.isfinite(dist)
        per_edgel[hit] = vals[idx[hit]]
    starts = np.cumsum([0] + [len(fine_sb.entries[k]) for k in keys[:-1]])
    means = _group_means(per_edgel, starts)
    return dict(zip(keys, means.tolist()))


def fuse_strengths(projected: list[dict], weights) -> dict:
    """Convex combination of per-entry strengths; independent of scale order."""
    if not projected:
        raise ValueError("at least one scale is required")
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != len(projected) or np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be non-negative, not all zero, one per scale")
    w = w / math.fsum(w)
    keys = sorted(projected[0])
    vals = np.array([[p[k] for k in keys] for p in projected])  # scales x entries
    terms = np.sort(w[:, None] * vals, axis=0)
    fused = terms.sum(axis=0)
    active = w > 0
    lo, hi = vals[active].min(axis=0), vals[active].max(axis=0)
    fused = np.clip(fused, lo, hi)
    return dict(zip(keys, fused.tolist()))


def fuse(scales, fine_sb: SparseBoundaries, radius: float | None = None,
         labels=None) -> Hierarchy:
    """Fuse ``[(hierarchy, weight), ...]`` into one hierarchy over ``fine_sb``."""
    scales = list(scales)
    if not scales:
        raise ValueError("empty scale set")
    projected = [project(h, fine_sb, radius) for h, _ in scales]
    fused = fuse_strengths(projected, [w for _, w in scales])
    return build_ucm(fine_sb.with_strengths(fused), labels)
