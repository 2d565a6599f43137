"""Sparse versus dense OWT/UCM timing on identical inputs.

The dense reference does what the sparse table avoids: every arc lookup and
every merge sweeps the full label image and boundary grid.  Both modes use
the same arithmetic in the same order, so their hierarchies are identical
bit for bit.
"""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from .contours import DEFAULT_SIGMAS, multiscale_oriented_contours
from .fusion import fuse
from .hierarchy import Hierarchy, build_ucm
from .partition import _group_means, merged_strength, sparse_from_labels
from .watershed import (
    DEFAULT_BINS,
    DEFAULT_EPSILON,
    arc_orientations,
    edgel_responses,
    orient_arc,
    owt_reweight,
    watershed_oversegment,
)

STAGES = ("contours", "watershed", "owt", "ucm", "fusion")
MODES = ("sparse", "dense")


def synthetic_image(height: int, width: int) -> np.ndarray:
    """Deterministic test scene: shaded shapes over a smooth textured background."""
    y, x = np.mgrid[0:height, 0:width] / np.array([height, width])[:, None, None]
    img = 0.35 + 0.1 * np.sin(7.0 * x + 3.0 * y) + 0.05 * np.cos(23.0 * x * y)
    shapes = [
        (0.30, 0.25, 0.18, 0.12, 0.85),
        (0.65, 0.70, 0.20, 0.25, 0.15),
        (0.75, 0.25, 0.12, 0.20, 0.60),
        (0.25, 0.75, 0.10, 0.10, 0.95),
    ]
    for cy, cx, ry, rx, val in shapes:
        img[((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2 <= 1.0] = val
    img[(y > 0.45) & (y < 0.55) & (x > 0.1) & (x < 0.9)] = 0.05
    return np.clip(img, 0.0, 1.0)


def _edgel_arrays(labels: np.ndarray):
    """Grid coordinates and flat pixel indices of every edgel, raster order."""
    h, w = labels.shape
    grid_w = 2 * w - 1
    rows, cols = np.nonzero(np.add.outer(np.arange(2 * h - 1), np.arange(grid_w)) % 2 == 1)
    vertical = rows % 2 == 0
    pi, pj = rows // 2, cols // 2
    left = pi * w + pj
    right = left + np.where(vertical, 1, w)
    return rows, cols, left, right


def dense_owt(labels: np.ndarray, stack: np.ndarray, epsilon: float = DEFAULT_EPSILON,
              bins: int = DEFAULT_BINS) -> dict:
    """OWT arc strengths, locating each arc by a sweep of the whole boundary grid."""
    lab = np.asarray(labels, dtype=np.int64).ravel()
    r = int(lab.max()) + 1
    rows, cols, left, right = _edgel_arrays(np.asarray(labels))
    la, lb = lab[left], lab[right]
    key = np.where(la != lb, np.minimum(la, lb) * r + np.maximum(la, lb), -1)
    pairs = np.unique(key[key >= 0]).tolist()
    values, sizes = [], []
    for k in pairs:
        idx = np.flatnonzero(key == k)
        coords = np.stack([rows[idx], cols[idx]], axis=1).astype(np.int64)
        arc = orient_arc(coords, epsilon, bins)
        values.append(edgel_responses(coords, arc.bins, stack))
        sizes.append(len(coords))
    if not pairs:
        return {}
    starts = np.cumsum([0] + sizes[:-1])
    means = np.clip(_group_means(np.concatenate(values), starts), 0.0, 1.0)
    return {(k // r, k % r): s for k, s in zip(pairs, means.tolist())}


def dense_build_ucm(labels: np.ndarray, strengths: dict) -> Hierarchy:
    """Greedy UCM on a per-edgel strength array, full sweeps at every merge.

    ``la``/``lb`` hold the current node on each side of every edgel; inactive
    edgels (both sides in one node) carry an infinite strength.
    """
    lab = np.asarray(labels, dtype=np.int64).ravel()
    r = int(lab.max()) + 1
    _, _, left, right = _edgel_arrays(np.asarray(labels))
    la, lb = lab[left], lab[right]
    key = np.minimum(la, lb) * r + np.maximum(la, lb)
    known = np.array(sorted(a * r + b for a, b in strengths), dtype=np.int64)
    vals = np.array([strengths[(k // r, k % r)] for k in known.tolist()])
    svals = np.full(len(left), math.inf)
    act = la != lb
    svals[act] = vals[np.searchsorted(known, key[act])]

    merges = []
    prev = -math.inf
    nxt = r
    while True:
        smin = svals.min()
        if smin == math.inf:
            break
        cand = np.flatnonzero(svals == smin)
        lo, hi = np.minimum(la[cand], lb[cand]), np.maximum(la[cand], lb[cand])
        k = np.lexsort((hi, lo))[0]
        a, b = int(lo[k]), int(hi[k])
        level = max(float(smin), prev)
        p = nxt
        nxt += 1
        merges.append((a, b, p, level))
        prev = level

        ma = (la == a) | (la == b)
        mb = (lb == a) | (lb == b)
        idx = np.flatnonzero((ma | mb) & (svals < math.inf))
        ta, tb, ts = la[idx], lb[idx], svals[idx]
        other = np.where(ma[idx], tb, ta)
        inner = (other == a) | (other == b)
        stats = {}
        for node in (a, b):
            m = ~inner & ((ta == node) | (tb == node))
            ux, first, cnt = np.unique(other[m], return_index=True, return_counts=True)
            sm = ts[m]
            stats[node] = {int(x): (float(sm[f]), int(n)) for x, f, n in zip(ux, first, cnt)}
        la[ma] = p
        lb[mb] = p
        svals[idx[inner]] = math.inf
        new = {}
        for x in sorted(set(stats[a]) | set(stats[b])):
            if x in stats[a] and x in stats[b]:
                (s1, n1), (s2, n2) = stats[a][x], stats[b][x]
                new[x] = merged_strength(s1, n1, s2, n2)
            else:
                new[x] = (stats[a].get(x) or stats[b].get(x))[0]
        if new:
            xs = np.array(sorted(new))
            ss = np.array([new[x] for x in xs.tolist()])
            svals[idx[~inner]] = ss[np.searchsorted(xs, other[~inner])]
    return Hierarchy(np.asarray(labels, dtype=np.int64), merges)


@dataclass
class BenchReport:
    shape: tuple[int, int]
    repeats: int
    times_ms: dict = field(default_factory=dict)  # mode -> stage -> median ms
    identical: bool = True
    region_counts: list = field(default_factory=list)

    def owt_ucm_ms(self, mode: str) -> float:
        t = self.times_ms[mode]
        return t["owt"] + t["ucm"]

    @property
    def speedup(self) -> float | None:
        if not all(m in self.times_ms for m in MODES):
            return None
        return self.owt_ucm_ms("dense") / self.owt_ucm_ms("sparse")

    def rows(self):
        for mode, stages in self.times_ms.items():
            for stage in STAGES:
                yield stage, mode, stages[stage]

    def summary(self) -> dict:
        out = {
            "height": self.shape[0], "width": self.shape[1], "repeats": self.repeats,
            "regions_per_scale": self.region_counts, "identical_hierarchies": self.identical,
            "times_ms": self.times_ms,
        }
        for mode in self.times_ms:
            out[f"{mode}_owt_ucm_ms"] = self.owt_ucm_ms(mode)
        if self.speedup is not None:
            out["owt_ucm_speedup"] = self.speedup
        return out


def run_pipeline(image, mode: str = "sparse", sigmas=DEFAULT_SIGMAS,
                 epsilon: float = DEFAULT_EPSILON, timings: dict | None = None):
    """Contours, watershed, OWT, UCM per scale, then fusion onto the finest scale.

    Returns ``(per_scale_hierarchies, fused)``; stage wall times in ms are
    added to ``timings`` when given.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    timings = {} if timings is None else timings
    for s in STAGES:
        timings.setdefault(s, 0.0)

    def clock(stage, fn, *args):
        t0 = time.perf_counter()
        out = fn(*args)
        timings[stage] += (time.perf_counter() - t0) * 1e3
        return out

    scales = clock("contours", multiscale_oriented_contours, image, sigmas)
    hierarchies = []
    fine = None
    for strength, stack in scales:
        labels = clock("watershed", watershed_oversegment, strength)
        if mode == "sparse":
            def owt(labels=labels, stack=stack):
                sb = sparse_from_labels(labels)
                return owt_reweight(sb, arc_orientations(sb, epsilon), stack)
            sb = clock("owt", owt)
            h = clock("ucm", build_ucm, sb, labels)
        else:
            strengths = clock("owt", dense_owt, labels, stack, epsilon)
            h = clock("ucm", dense_build_ucm, labels, strengths)
        hierarchies.append(h)
        if fine is None:
            fine = labels

    def fusion():
        fine_sb = sparse_from_labels(fine)
        return fuse([(h, 1.0) for h in hierarchies], fine_sb, labels=fine)

    fused = clock("fusion", fusion)
    return hierarchies, fused


def hierarchies_equal(h1: Hierarchy, h2: Hierarchy) -> bool:
    return np.array_equal(h1.finest, h2.finest) and h1.merges == h2.merges


def bench_pipeline(image=None, size=(321, 481), mode: str = "both", repeats: int = 5,
                   sigmas=DEFAULT_SIGMAS, epsilon: float = DEFAULT_EPSILON) -> BenchReport:
    """Median per-stage wall time of each mode over ``repeats`` runs."""
    if image is None:
        image = synthetic_image(*size)
    image = np.asarray(image, dtype=np.float64)
    modes = MODES if mode == "both" else (mode,)
    if any(m not in MODES for m in modes):
        raise ValueError(f"mode must be 'both' or one of {MODES}")
    report = BenchReport(tuple(image.shape), repeats)
    outputs = {}
    for m in modes:
        runs = []
        for _ in range(repeats):
            t = {}
            outputs[m] = run_pipeline(image, m, sigmas, epsilon, t)
            runs.append(t)
        report.times_ms[m] = {s: statistics.median(r[s] for r in runs) for s in STAGES}
    first = outputs[modes[0]]
    report.region_counts = [h.region_count for h in first[0]]
    for m in modes[1:]:
        hs, fused = outputs[m]
        same = all(hierarchies_equal(a, b) for a, b in zip(first[0], hs))
        report.identical &= same and hierarchies_equal(first[1], fused)
    return report
