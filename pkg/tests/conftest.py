"""Random instance generators and brute-force oracles shared by the tests.

The oracles deliberately avoid the package's own helpers: they walk pixels
with plain loops so that agreement is evidence, not tautology.
"""
from __future__ import annotations

import heapq
from collections import deque

import numpy as np
import pytest
from scipy import ndimage


def canonicalize(labels) -> np.ndarray:
    """Relabel by first appearance in raster order (loop version)."""
    lab = np.asarray(labels)
    mapping = {}
    out = np.empty(lab.shape, dtype=np.int64)
    for idx, v in np.ndenumerate(lab):
        if v not in mapping:
            mapping[v] = len(mapping)
        out[idx] = mapping[v]
    return out


def random_labels(rng, h: int, w: int, max_regions: int = 6) -> np.ndarray:
    """Random valid label map: blocky colours split into 4-connected parts."""
    block = int(rng.integers(1, 5))
    k = int(rng.integers(1, max_regions + 1))
    coarse = rng.integers(0, k, (h // block + 1, w // block + 1))
    colours = np.kron(coarse, np.ones((block, block), dtype=np.int64))[:h, :w]
    noise = rng.random((h, w)) < 0.05
    colours[noise] = rng.integers(0, k, int(noise.sum()))
    out = np.zeros((h, w), dtype=np.int64)
    offset = 0
    for c in np.unique(colours):
        comp, n = ndimage.label(colours == c)
        out[comp > 0] = comp[comp > 0] + offset - 1
        offset += n
    return canonicalize(out)


def brute_edgels(labels) -> dict:
    """Pair -> set of grid coordinates, by scanning all 4-adjacent pixel pairs."""
    lab = np.asarray(labels)
    h, w = lab.shape
    out: dict = {}
    for i in range(h):
        for j in range(w):
            for di, dj in ((0, 1), (1, 0)):
                ii, jj = i + di, j + dj
                if ii < h and jj < w and lab[i, j] != lab[ii, jj]:
                    a, b = sorted((int(lab[i, j]), int(lab[ii, jj])))
                    out.setdefault((a, b), set()).add((2 * i + di, 2 * j + dj))
    return out


def flood_fill(join) -> np.ndarray:
    """Canonical 4-connected components; ``join(p, q)`` says if pixels connect."""
    h, w = join.shape
    lab = -np.ones((h, w), dtype=np.int64)
    nxt = 0
    for i in range(h):
        for j in range(w):
            if lab[i, j] >= 0:
                continue
            lab[i, j] = nxt
            queue = deque([(i, j)])
            while queue:
                r, c = queue.popleft()
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < h and 0 <= cc < w and lab[rr, cc] < 0 and join((r, c), (rr, cc)):
                        lab[rr, cc] = nxt
                        queue.append((rr, cc))
            nxt += 1
    return lab


class Joiner:
    """Adapter so ``flood_fill`` can take a predicate with a shape."""

    def __init__(self, shape, fn):
        self.shape = shape
        self.fn = fn

    def __call__(self, p, q):
        return self.fn(p, q)


def edgel_of(p, q) -> tuple[int, int]:
    return p[0] + q[0], p[1] + q[1]


def grid_components(grid) -> np.ndarray:
    """Flood fill of pixels not separated by an edgel with value > 0."""
    g = np.asarray(grid)
    shape = ((g.shape[0] + 1) // 2, (g.shape[1] + 1) // 2)
    return flood_fill(Joiner(shape, lambda p, q: g[edgel_of(p, q)] <= 0))


def union_find_merge(labels, pairs) -> np.ndarray:
    """Canonical partition after merging every listed region pair."""
    r = int(np.max(labels)) + 1
    parent = list(range(r))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(x) for x in range(r)])
    return canonicalize(roots[np.asarray(labels)])


def brute_watershed(strength) -> np.ndarray:
    """Plain priority flood: minimum plateaus seed basins, front ordered by (value, row, col)."""
    s = np.asarray(strength, dtype=float)
    h, w = s.shape

    def nbrs(r, c):
        for rr, cc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
            if 0 <= rr < h and 0 <= cc < w:
                yield rr, cc

    plateau = flood_fill(Joiner((h, w), lambda p, q: s[p] == s[q]))
    n = int(plateau.max()) + 1
    is_min = [True] * n
    for r in range(h):
        for c in range(w):
            if any(s[rr, cc] < s[r, c] for rr, cc in nbrs(r, c)):
                is_min[plateau[r, c]] = False
    seed = {}
    for p in range(n):
        if is_min[p]:
            seed[p] = len(seed)
    lab = -np.ones((h, w), dtype=np.int64)
    heap = []
    for r in range(h):
        for c in range(w):
            if is_min[plateau[r, c]]:
                lab[r, c] = seed[plateau[r, c]]
                heapq.heappush(heap, (s[r, c], r, c))
    while heap:
        _, r, c = heapq.heappop(heap)
        for rr, cc in nbrs(r, c):
            if lab[rr, cc] < 0:
                lab[rr, cc] = lab[r, c]
                heapq.heappush(heap, (s[rr, cc], rr, cc))
    return canonicalize(lab)


def brute_agglomeration(labels, pair_strength: dict):
    """Greedy merging recomputed from scratch after every step.

    Every edgel keeps the strength of its finest pair; the strength between
    two current nodes is the mean over all edgels separating them.  The
    weakest pair (smallest ids on a tie) merges into a new node numbered
    after the existing ones, at a level lifted to the previous level.
    """
    node = np.asarray(labels, dtype=np.int64).copy()
    h, w = node.shape
    fine = np.asarray(labels)
    r = int(fine.max()) + 1
    merges = []
    prev = -np.inf
    nxt = r
    while True:
        sums: dict = {}
        for i in range(h):
            for j in range(w):
                for di, dj in ((0, 1), (1, 0)):
                    ii, jj = i + di, j + dj
                    if ii < h and jj < w and node[i, j] != node[ii, jj]:
                        key = tuple(sorted((int(node[i, j]), int(node[ii, jj]))))
                        fkey = tuple(sorted((int(fine[i, j]), int(fine[ii, jj]))))
                        s, n = sums.get(key, (0.0, 0))
                        sums[key] = (s + pair_strength[fkey], n + 1)
        if not sums:
            break
        best = min(sums, key=lambda k: (sums[k][0] / sums[k][1], k))
        level = max(sums[best][0] / sums[best][1], prev)
        merges.append((best[0], best[1], nxt, level))
        node[(node == best[0]) | (node == best[1])] = nxt
        prev = level
        nxt += 1
    return merges


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
