"""Boundary orientation: ground truth, a local-gradient baseline and accuracy curves."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.spatial import cKDTree

from .partition import sparse_from_labels
from .watershed import DEFAULT_BINS, DEFAULT_EPSILON, arc_orientations, quantize_orientation

GRADIENT_SIGMA = 2.0


@dataclass
class OrientationField:
    rows: np.ndarray
    cols: np.ndarray
    bins: np.ndarray
    confidence: np.ndarray
    height: int
    width: int
    bins_count: int = DEFAULT_BINS

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class OrientationCurve:
    percentiles: np.ndarray
    accuracy: np.ndarray
    auc: float


def gt_orientations(gt_labels, epsilon: float = DEFAULT_EPSILON,
                    bins: int = DEFAULT_BINS) -> OrientationField:
    """Ground-truth orientation of every boundary pixel of a partition.

    A boundary pixel is one whose right or lower neighbour carries another
    label; it owns those (at most two) edgels.  When they disagree the edgel
    on the longer simplified segment wins, the vertical-boundary edgel on a
    tie.
    """
    labels = np.asarray(gt_labels)
    sb = sparse_from_labels(labels)
    geom = arc_orientations(sb, epsilon, bins)
    h, w = labels.shape
    best_len = np.full((h, w), -1.0)
    best_bin = np.full((h, w), -1, dtype=np.int64)
    # horizontal-boundary edgels first so vertical ones win ties
    for vertical_pass in (False, True):
        for key, e in sb.entries.items():
            arc = geom.arcs[key]
            r, c = e.coords[:, 0], e.coords[:, 1]
            sel = (r % 2 == 0) == vertical_pass
            pr, pc = r[sel] // 2, c[sel] // 2
            ln = arc.seg_lengths[sel]
            better = ln >= best_len[pr, pc]
            best_len[pr[better], pc[better]] = ln[better]
            best_bin[pr[better], pc[better]] = arc.bins[sel][better]
    rows, cols = np.nonzero(best_bin >= 0)
    return OrientationField(rows, cols, best_bin[rows, cols], np.ones(len(rows)), h, w, bins)


def local_gradient_orientation(contour, sigma: float = GRADIENT_SIGMA,
                               bins: int = DEFAULT_BINS) -> OrientationField:
    """Per-pixel tangent orientation perpendicular to the smoothed gradient.

    Confidence is the gradient magnitude normalised by its image maximum.
    """
    img = np.asarray(contour, dtype=np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    gy = gaussian_filter(img, sigma, order=(1, 0))  # d/drow
    gx = gaussian_filter(img, sigma, order=(0, 1))
    mag = np.hypot(gx, gy)
    normal = np.arctan2(-gy, gx)
    tangent_bins = quantize_orientation(normal + math.pi / 2, bins)
    peak = mag.max()
    conf = mag / peak if peak > 0 else np.zeros_like(mag)
    h, w = img.shape
    rows, cols = np.indices((h, w))
    return OrientationField(rows.ravel(), cols.ravel(), tangent_bins.ravel(),
                            conf.ravel(), h, w, bins)


def _lookup(pred: OrientationField, gt: OrientationField) -> tuple[np.ndarray, np.ndarray]:
    """Prediction bin and confidence at every GT pixel (nearest record)."""
    index = np.full((gt.height, gt.width), -1, dtype=np.int64)
    inside = (pred.rows >= 0) & (pred.rows < gt.height) & (pred.cols >= 0) & (pred.cols < gt.width)
    index[pred.rows[inside], pred.cols[inside]] = np.flatnonzero(inside)
    idx = index[gt.rows, gt.cols]
    missing = idx < 0
    if np.any(missing):
        if len(pred) == 0:
            raise ValueError("prediction field is empty")
        tree = cKDTree(np.stack([pred.rows, pred.cols], axis=1))
        _, near = tree.query(np.stack([gt.rows[missing], gt.cols[missing]], axis=1))
        idx[missing] = near
    return pred.bins[idx], pred.confidence[idx]


def mean_class_accuracy(pred_bins, gt_bins, bins: int = DEFAULT_BINS) -> float:
    """Accuracy per ground-truth class, averaged over the classes present."""
    gt_bins = np.asarray(gt_bins)
    total = np.bincount(gt_bins, minlength=bins)
    correct = np.bincount(gt_bins[np.asarray(pred_bins) == gt_bins], minlength=bins)
    present = total > 0
    return float(np.mean(correct[present] / total[present]))


def orient_accuracy(pred, gt, percentiles=None) -> OrientationCurve:
    """Mean per-class accuracy over the most confident GT pixels.

    ``pred`` and ``gt`` are fields of one image or equal-length lists of
    fields (one per image).  For each percentile ``p`` the ``p``% of GT pixels
    with the most confident predictions are kept, ties at the cut included.
    AUC is the trapezoid area under the curve divided by the percentile span.
    """
    if isinstance(gt, OrientationField):
        pred, gt = [pred], [gt]
    if len(pred) != len(gt):
        raise ValueError("pred and gt must list the same images")
    bins = gt[0].bins_count if gt else DEFAULT_BINS
    pb, pc, gb = [], [], []
    for p, g in zip(pred, gt):
        if len(g) == 0:
            continue
        b, c = _lookup(p, g)
        pb.append(b)
        pc.append(c)
        gb.append(g.bins)
    if not gb:
        raise ValueError("ground truth holds no boundary pixels")
    pred_bins, conf, gt_bins = np.concatenate(pb), np.concatenate(pc), np.concatenate(gb)

    if percentiles is None:
        percentiles = np.arange(1, 101)
    percentiles = np.asarray(percentiles, dtype=np.float64)
    order = np.sort(conf)[::-1]
    n = len(conf)
    acc = np.empty(len(percentiles))
    for i, p in enumerate(percentiles):
        k = max(1, math.ceil(p / 100.0 * n - 1e-9))
        sel = conf >= order[k - 1]
        acc[i] = mean_class_accuracy(pred_bins[sel], gt_bins[sel], bins)
    if len(percentiles) > 1:
        span = percentiles[-1] - percentiles[0]
        auc = float(np.sum((acc[1:] + acc[:-1]) * np.diff(percentiles)) / 2.0 / span)
    else:
        auc = float(acc[0])
    return OrientationCurve(percentiles, acc, auc)
