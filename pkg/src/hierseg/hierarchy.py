"""Ultrametric contour maps built by greedy merging of sparse boundaries."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .partition import (
    PartitionError,
    SparseBoundaries,
    _fill_junctions,
    grid_shape,
    labels_from_sparse,
    merged_strength,
    pair_key,
    region_count,
    sparse_from_labels,
    validate_labels,
)

Merge = tuple[int, int, int, float]


@dataclass
class Hierarchy:
    """Finest partition plus the ordered merge list.

    Leaves are ``0..R-1``; the i-th merge creates node ``R+i``.  Each merge is
    ``(a, b, parent, level)`` with ``a < b`` and levels nondecreasing.
    """

    finest: np.ndarray
    merges: list[Merge] = field(default_factory=list)

    def __post_init__(self):
        self.finest = validate_labels(self.finest)
        r = self.region_count
        if len(self.merges) != r - 1:
            raise PartitionError(f"expected {r - 1} merges, got {len(self.merges)}")
        used = set()
        prev = -np.inf
        for i, (a, b, p, lvl) in enumerate(self.merges):
            if p != r + i:
                raise PartitionError(f"merge {i} creates node {p}, expected {r + i}")
            if not (0 <= a < b < p) or a in used or b in used:
                raise PartitionError(f"merge {i} has invalid children {(a, b)}")
            if lvl < prev:
                raise PartitionError(f"merge levels decrease at merge {i}")
            used.update((a, b))
            prev = lvl

    @property
    def region_count(self) -> int:
        return region_count(self.finest)

    @property
    def shape(self) -> tuple[int, int]:
        return self.finest.shape

    @property
    def levels(self) -> np.ndarray:
        return np.array([m[3] for m in self.merges], dtype=np.float64)


def build_ucm(sb: SparseBoundaries, labels=None) -> Hierarchy:
    """Greedy merging in order of increasing boundary strength.

    The weakest remaining boundary is erased at each step (ties go to the
    lexicographically smallest pair); the merge level is lifted to the
    previous level when recombination made it lower.  ``labels`` is the
    finest partition; it is reconstructed from ``sb`` when omitted.
    """
    finest = labels_from_sparse(sb) if labels is None else validate_labels(labels)
    r = sb.region_count
    if region_count(finest) != r:
        raise PartitionError("label map and boundaries disagree on the region count")
    strength: dict[tuple[int, int], float] = {}
    length: dict[tuple[int, int], int] = {}
    nbrs: dict[int, set[int]] = {i: set() for i in range(r)}
    heap = []
    for key, e in sb.entries.items():
        strength[key] = e.strength
        length[key] = len(e)
        nbrs[key[0]].add(key[1])
        nbrs[key[1]].add(key[0])
        heap.append((e.strength, key[0], key[1]))
    heapq.heapify(heap)

    merges: list[Merge] = []
    prev = -np.inf
    nxt = r
    while heap:
        s, a, b = heapq.heappop(heap)
        key = (a, b)
        if strength.get(key) != s or a not in nbrs or b not in nbrs:
            continue
        level = max(s, prev)
        p = nxt
        nxt += 1
        merges.append((a, b, p, level))
        prev = level
        del strength[key], length[key]
        na, nb = nbrs.pop(a), nbrs.pop(b)
        na.discard(b)
        nb.discard(a)
        nbrs[p] = set()
        for x in sorted(na | nb):
            nbrs[x].discard(a)
            nbrs[x].discard(b)
            ka, kb = pair_key(a, x), pair_key(b, x)
            if x in na and x in nb:
                s_new = merged_strength(strength[ka], length[ka], strength[kb], length[kb])
                n_new = length[ka] + length[kb]
                del strength[ka], length[ka], strength[kb], length[kb]
            else:
                k = ka if x in na else kb
                s_new, n_new = strength.pop(k), length.pop(k)
            kp = (x, p)
            strength[kp] = s_new
            length[kp] = n_new
            nbrs[x].add(p)
            nbrs[p].add(x)
            heapq.heappush(heap, (s_new, x, p))
    if len(merges) != r - 1:
        raise PartitionError("region adjacency graph is disconnected")
    return Hierarchy(finest, merges)


def _leaf_roots(h: Hierarchy, t: float) -> np.ndarray:
    r = h.region_count
    parent = np.arange(r + len(h.merges))
    for a, b, p, lvl in h.merges:
        if lvl > t:
            break
        parent[a] = p
        parent[b] = p
    # merges are ordered, so one backwards pass resolves every chain
    for node in range(len(parent) - 1, -1, -1):
        parent[node] = parent[parent[node]]
    return parent[:r]


def partition_at(h: Hierarchy, t: float) -> np.ndarray:
    """Partition after applying every merge with level <= t.

    Regions are numbered in order of the smallest finest id they contain, so
    a threshold below every level returns the finest partition unchanged.
    """
    roots = _leaf_roots(h, t)
    # roots are first met at their smallest leaf when scanning leaves in order
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse][h.finest]


def edgel_levels(h: Hierarchy) -> SparseBoundaries:
    """Finest boundaries with each entry's strength set to its ultrametric level.

    The level of a finest boundary is the level of the merge that first puts
    its two regions in one node.
    """
    fine = sparse_from_labels(h.finest)
    groups: dict[tuple[int, int], list[tuple[int, int]]] = {k: [k] for k in fine.entries}
    nbrs = {k: set(v) for k, v in fine.neighbors.items()}
    level: dict[tuple[int, int], float] = {}
    for a, b, p, lvl in h.merges:
        for k in groups.pop((a, b), []):
            level[k] = lvl
        na, nb = nbrs.pop(a), nbrs.pop(b)
        na.discard(b)
        nb.discard(a)
        nbrs[p] = na | nb
        for x in nbrs[p]:
            nbrs[x].discard(a)
            nbrs[x].discard(b)
            nbrs[x].add(p)
            merged = groups.pop(pair_key(a, x), []) + groups.pop(pair_key(b, x), [])
            groups[(x, p)] = merged
    return fine.with_strengths(level)


def ucm_grid(h: Hierarchy) -> np.ndarray:
    """Dense ``(2H-1) x (2W-1)`` map holding each edgel's merge level."""
    sb = edgel_levels(h)
    grid = np.zeros(grid_shape(*h.shape))
    for e in sb.entries.values():
        grid[e.coords[:, 0], e.coords[:, 1]] = e.strength
    _fill_junctions(grid)
    return grid


def level_count(h: Hierarchy) -> tuple[int, list[float]]:
    """Number of distinct merge levels and the sorted levels themselves."""
    levels = sorted(set(float(m[3]) for m in h.merges))
    return len(levels), levels
