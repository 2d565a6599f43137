"""Boundary (F_b) and region (F_op) benchmarks with ODS/OIS/AP summaries.

Boundary maps are pixel maps in which pixel ``(i, j)`` is on when the edgel to
its right or below it is on.  Partitions and UCM grids are converted with the
same rule, then thinned, so that identical partitions give identical maps.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching
from scipy.spatial import cKDTree
from skimage.morphology import skeletonize

from .hierarchy import Hierarchy, level_count, partition_at
from .partition import split_grid

MAX_DIST = {"bsds": 0.0075, "voc-context": 0.0075, "voc12": 0.01, "nyud": 0.011}
DEFAULT_MAX_DIST = MAX_DIST["bsds"]
MAX_THRESHOLDS = 2000

# objects-and-parts constants
OBJECT_OVERLAP = 0.95
PART_OVERLAP = 0.25
PART_WEIGHT = 0.1


def _edgel_bmap(vert_on: np.ndarray, horiz_on: np.ndarray, shape) -> np.ndarray:
    h, w = shape
    bmap = np.zeros((h, w), dtype=bool)
    bmap[:, :-1] |= vert_on
    bmap[:-1, :] |= horiz_on
    return bmap


def thin(bmap: np.ndarray) -> np.ndarray:
    return skeletonize(np.asarray(bmap, dtype=bool))


def seg_boundary_map(labels) -> np.ndarray:
    """Thinned boundary map of a partition."""
    lab = np.asarray(labels)
    return thin(_edgel_bmap(lab[:, :-1] != lab[:, 1:], lab[:-1, :] != lab[1:, :], lab.shape))


def ucm_boundary_map(grid: np.ndarray, t: float) -> np.ndarray:
    """Thinned boundary map of a UCM grid binarized at ``t`` (edgels > t)."""
    vert, horiz = split_grid(np.asarray(grid))
    shape = ((grid.shape[0] + 1) // 2, (grid.shape[1] + 1) // 2)
    return thin(_edgel_bmap(vert > t, horiz > t, shape))


def gt_boundary_maps(gts) -> list[np.ndarray]:
    """Boundary maps of a ground-truth set; boolean maps pass through."""
    out = []
    for g in gts:
        g = np.asarray(g)
        out.append(g if g.dtype == bool else seg_boundary_map(g))
    return out


@dataclass
class MatchCounts:
    tp: int          # predicted pixels matched in at least one annotation
    fp: int
    sum_gt: int      # GT boundary pixels summed over annotations
    matched_gt: int  # matched GT pixels summed over annotations

    @property
    def n_pred(self) -> int:
        return self.tp + self.fp

    @property
    def precision(self) -> float:
        return self.tp / self.n_pred if self.n_pred else 1.0

    @property
    def recall(self) -> float:
        return self.matched_gt / self.sum_gt if self.sum_gt else 0.0

    @property
    def f(self) -> float:
        return f_measure(self.precision, self.recall)


def f_measure(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _augment(adj: list[list[int]], partner_p: np.ndarray, partner_g: np.ndarray, count: int) -> None:
    """Apply ``count`` shortest augmenting paths to a partial matching, in place."""
    for _ in range(count):
        roots = [i for i in range(len(adj)) if partner_p[i] < 0 and adj[i]]
        via: dict[int, int] = {}
        seen = set(roots)
        queue = deque(roots)
        end = -1
        while queue and end < 0:
            i = queue.popleft()
            for j in adj[i]:
                if j in via:
                    continue
                via[j] = i
                k = partner_g[j]
                if k < 0:
                    end = j
                    break
                if k not in seen:
                    seen.add(k)
                    queue.append(k)
        j = end
        while j >= 0:
            i = via[j]
            j_prev = partner_p[i]
            partner_p[i] = j
            partner_g[j] = i
            j = j_prev


def assign_matches(pred_pts: np.ndarray, gt_pts: np.ndarray, radius: float):
    """Maximum one-to-one assignment of points closer than ``radius``.

    The matching grows one distance level at a time: pairs at the level are
    taken closest first, then augmenting paths restore a maximum matching.
    Augmenting never unmatches a point, so the matched sets only grow with
    ``radius``.  Returns boolean masks of matched predicted and GT points.
    """
    n, m = len(pred_pts), len(gt_pts)
    partner_p = np.full(n, -1, dtype=np.int64)
    partner_g = np.full(m, -1, dtype=np.int64)
    if n == 0 or m == 0:
        return partner_p >= 0, partner_g >= 0
    pairs = cKDTree(pred_pts).sparse_distance_matrix(cKDTree(gt_pts), radius, output_type="ndarray")
    order = np.lexsort((pairs["j"], pairs["i"], pairs["v"]))
    pi, pj, pv = pairs["i"][order], pairs["j"][order], pairs["v"][order]
    bounds = np.flatnonzero(np.diff(pv)) + 1
    adj: list[list[int]] = [[] for _ in range(n)]
    matched = 0
    for lo, hi in zip(np.concatenate([[0], bounds]), np.append(bounds, len(pv))):
        for i, j in zip(pi[lo:hi].tolist(), pj[lo:hi].tolist()):
            adj[i].append(j)
            if partner_p[i] < 0 and partner_g[j] < 0:
                partner_p[i] = j
                partner_g[j] = i
                matched += 1
        if matched == min(n, m):
            break
        graph = csr_matrix((np.ones(hi, dtype=np.int8), (pi[:hi], pj[:hi])), shape=(n, m))
        best = int(np.count_nonzero(maximum_bipartite_matching(graph, perm_type="column") >= 0))
        if best > matched:
            _augment(adj, partner_p, partner_g, best - matched)
            matched = best
    return partner_p >= 0, partner_g >= 0


def match_boundaries(pred_bmap, gts, max_dist: float = DEFAULT_MAX_DIST) -> MatchCounts:
    """Match a predicted boundary map against every annotation of one image.

    The matching radius is ``max_dist`` times the image diagonal.
    """
    if not 0 < max_dist < 1:
        raise ValueError("max_dist must lie in (0, 1)")
    pred = np.asarray(pred_bmap, dtype=bool)
    gt_maps = gt_boundary_maps(gts)
    if not gt_maps:
        raise ValueError("at least one annotation is required")
    for g in gt_maps:
        if g.shape != pred.shape:
            raise ValueError(f"annotation shape {g.shape} does not match prediction {pred.shape}")
    radius = max_dist * math.hypot(*pred.shape)
    pred_pts = np.argwhere(pred)
    any_match = np.zeros(len(pred_pts), dtype=bool)
    sum_gt = matched_gt = 0
    for g in gt_maps:
        gt_pts = np.argwhere(g)
        mp, mg = assign_matches(pred_pts, gt_pts, radius)
        any_match |= mp
        sum_gt += len(gt_pts)
        matched_gt += int(mg.sum())
    tp = int(any_match.sum())
    return MatchCounts(tp, len(pred_pts) - tp, sum_gt, matched_gt)


@dataclass
class PRCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f: np.ndarray
    ods_f: float
    ods_threshold: float
    ods_precision: float
    ods_recall: float
    ois_f: float
    ap: float

    def summary(self) -> dict:
        return {
            "ods_f": self.ods_f, "ods_threshold": self.ods_threshold,
            "ods_precision": self.ods_precision, "ods_recall": self.ods_recall,
            "ois_f": self.ois_f, "ap": self.ap,
        }

    def rows(self):
        return zip(self.thresholds.tolist(), self.precision.tolist(),
                   self.recall.tolist(), self.f.tolist())


def _pr_from_counts(c: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counts are ``[..., (p_num, p_den, r_num, r_den)]``; empty predictions give P=1."""
    p = np.where(c[..., 1] > 0, c[..., 0] / np.maximum(c[..., 1], 1e-300), 1.0)
    r = np.where(c[..., 3] > 0, c[..., 2] / np.maximum(c[..., 3], 1e-300), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return p, r, f


def average_precision(precision: np.ndarray, recall: np.ndarray) -> float:
    """Mean interpolated precision at recall 0, 0.01, ..., 1 (0 outside the curve)."""
    order = np.argsort(recall, kind="stable")
    r, p = recall[order], precision[order]
    samples = np.linspace(0.0, 1.0, 101)
    interp = np.interp(samples, r, p)
    interp[(samples < r[0]) | (samples > r[-1])] = 0.0
    return float(np.mean(interp))


def summarize(thresholds, per_image_counts) -> PRCurve:
    """Dataset-level curve from per-image ``(T, 4)`` count arrays."""
    counts = np.asarray(per_image_counts, dtype=np.float64)
    if counts.ndim == 2:
        counts = counts[None]
    total = counts.sum(axis=0)
    p, r, f = _pr_from_counts(total)
    best = int(np.argmax(f))
    _, _, f_img = _pr_from_counts(counts)
    best_t = np.argmax(f_img, axis=1)
    ois_counts = counts[np.arange(len(counts)), best_t].sum(axis=0)
    _, _, ois_f = _pr_from_counts(ois_counts)
    return PRCurve(
        thresholds=np.asarray(thresholds, dtype=np.float64), precision=p, recall=r, f=f,
        ods_f=float(f[best]), ods_threshold=float(thresholds[best]),
        ods_precision=float(p[best]), ods_recall=float(r[best]),
        ois_f=float(ois_f), ap=average_precision(p, r),
    )


def default_thresholds(levels) -> np.ndarray:
    """Every distinct level (capped at 2000 quantiles) plus one point below them."""
    levels = np.unique(np.asarray(levels, dtype=np.float64))
    if len(levels) == 0:
        return np.array([0.0])
    if len(levels) > MAX_THRESHOLDS:
        levels = np.unique(np.quantile(levels, np.linspace(0, 1, MAX_THRESHOLDS)))
    return np.concatenate([[np.nextafter(levels[0], -np.inf)], levels])


def hierarchy_thresholds(hierarchies) -> np.ndarray:
    levels = []
    for h in hierarchies:
        levels.extend(level_count(h)[1])
    return default_thresholds(levels)


def boundary_counts(grid, gts, thresholds, max_dist: float = DEFAULT_MAX_DIST) -> np.ndarray:
    """``(T, 4)`` counts ``(tp, n_pred, matched_gt, sum_gt)`` of one image."""
    gt_maps = gt_boundary_maps(gts)
    out = np.zeros((len(thresholds), 4))
    for k, t in enumerate(thresholds):
        m = match_boundaries(ucm_boundary_map(grid, t), gt_maps, max_dist)
        out[k] = (m.tp, m.n_pred, m.matched_gt, m.sum_gt)
    return out


def _as_dataset(items, gts):
    if isinstance(items, (list, tuple)):
        return list(items), list(gts)
    return [items], [gts]


def pr_curve_boundary(grids, gts, thresholds=None, max_dist: float = DEFAULT_MAX_DIST) -> PRCurve:
    """Boundary PR curve of one UCM grid or a list of them.

    ``gts`` is one ground-truth set (list of label maps) per image.
    """
    grids, gts = _as_dataset(grids, gts)
    if thresholds is None:
        thresholds = default_thresholds(np.concatenate([np.unique(g[g > 0]) for g in grids]))
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be sorted ascending")
    counts = [boundary_counts(g, gt, thresholds, max_dist) for g, gt in zip(grids, gts)]
    return summarize(thresholds, counts)


def _contingency(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    na, nb = ai.max() + 1, bi.max() + 1
    key, counts = np.unique(ai * nb + bi, return_counts=True)
    return ai, bi, key // nb, key % nb, counts, np.bincount(ai), np.bincount(bi)


def _op_weights(partition, gt):
    """Per-region weights of candidate and GT regions for one annotation."""
    _, _, si, gi, n, size_s, size_g = _contingency(partition, gt)
    rel_s = n / size_s[si]
    rel_g = n / size_g[gi]
    obj = (rel_s >= OBJECT_OVERLAP) & (rel_g >= OBJECT_OVERLAP)
    part = ~obj & (((rel_s >= OBJECT_OVERLAP) & (rel_g >= PART_OVERLAP))
                   | ((rel_g >= OBJECT_OVERLAP) & (rel_s >= PART_OVERLAP)))
    pair_w = np.where(obj, 1.0, np.where(part, PART_WEIGHT, 0.0))
    ws = np.zeros(len(size_s))
    wg = np.zeros(len(size_g))
    np.maximum.at(ws, si, pair_w)
    np.maximum.at(wg, gi, pair_w)
    return ws, size_s, wg, size_g


def region_counts(partition, gts) -> np.ndarray:
    """``(p_num, p_den, r_num, r_den)`` of the objects-and-parts measure.

    Region pairs are objects when each covers at least 95% of the other,
    parts when one lies 95% inside the other and covers at least 25% of it.
    Regions score 1 as objects, 0.1 as parts, 0 otherwise; precision and
    recall are area-weighted scores.  A candidate takes its best score over
    annotations; recall pools all annotations.
    """
    part = np.asarray(partition)
    best_s = None
    r_num = r_den = 0.0
    for gt in gts:
        gt = np.asarray(gt)
        if gt.shape != part.shape:
            raise ValueError(f"annotation shape {gt.shape} does not match partition {part.shape}")
        ws, size_s, wg, size_g = _op_weights(part, gt)
        best_s = ws if best_s is None else np.maximum(best_s, ws)
        r_num += float(np.sum(wg * size_g))
        r_den += float(part.size)
    if best_s is None:
        raise ValueError("at least one annotation is required")
    return np.array([float(np.sum(best_s * size_s)), float(part.size), r_num, r_den])


def region_measure(partition, gts) -> tuple[float, float, float]:
    p, r, f = _pr_from_counts(region_counts(partition, gts))
    return float(p), float(r), float(f)


def pr_curve_region(hierarchies, gts, thresholds=None) -> PRCurve:
    """Region PR curve sweeping the partitions of one or more hierarchies."""
    if isinstance(hierarchies, Hierarchy):
        hierarchies, gts = [hierarchies], [gts]
    if thresholds is None:
        thresholds = hierarchy_thresholds(hierarchies)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be sorted ascending")
    counts = [np.array([region_counts(partition_at(h, t), gt) for t in thresholds])
              for h, gt in zip(hierarchies, gts)]
    return summarize(thresholds, counts)
