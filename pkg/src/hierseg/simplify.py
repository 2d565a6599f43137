"""Douglas-Peucker polyline simplification."""
from __future__ import annotations

import numpy as np


def _distances(points: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    d = end - start
    norm = np.hypot(d[0], d[1])
    rel = points - start
    if norm == 0:
        return np.hypot(rel[:, 0], rel[:, 1])
    return np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / norm


def douglas_peucker(points, epsilon: float) -> list[int]:
    """Indices of the points kept by Douglas-Peucker at tolerance ``epsilon``.

    A point is kept when its perpendicular distance to the chord of the
    current span exceeds ``epsilon``.  The first and last points are always
    kept; the result is sorted.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n <= 2:
        return list(range(n))
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        d = _distances(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return np.flatnonzero(keep).tolist()
