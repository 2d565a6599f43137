"""Image partitions: pixel labels, the boundary grid and sparse boundaries.

Coordinates on the boundary grid follow one convention everywhere. For an
image of ``H x W`` pixels the grid is ``(2H-1) x (2W-1)``:

* ``(2i, 2j)`` is the slot of pixel ``(i, j)`` and always holds 0,
* ``(2i, 2j+1)`` is the vertical edgel between pixels ``(i, j)`` and ``(i, j+1)``,
* ``(2i+1, 2j)`` is the horizontal edgel between pixels ``(i, j)`` and ``(i+1, j)``,
* ``(2i+1, 2j+1)`` is a junction.

Label maps are plain 2-D integer arrays with ids ``0..R-1``; every region is
4-connected.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class PartitionError(ValueError):
    """Raised for label maps or boundary tables that break their invariants."""


Pair = tuple[int, int]


def pair_key(a: int, b: int) -> Pair:
    return (a, b) if a < b else (b, a)


@dataclass
class Boundary:
    strength: float
    coords: np.ndarray  # (n, 2) int64 grid coordinates

    def __len__(self) -> int:
        return len(self.coords)


@dataclass
class SparseBoundaries:
    """Look-up table from neighbouring region pairs to their boundary.

    ``entries`` maps ``(a, b)`` with ``a < b`` to a :class:`Boundary`.
    ``neighbors`` is the region adjacency derived from the keys and is kept
    in sync by :func:`erase_boundary`.  ``work`` counts the entries and
    edgel coordinates touched by mutations.
    """

    height: int
    width: int
    region_count: int
    entries: dict[Pair, Boundary] = field(default_factory=dict)
    neighbors: dict[int, set[int]] = field(default_factory=dict, repr=False)
    work: int = field(default=0, repr=False)

    def __post_init__(self):
        if not self.neighbors:
            self.neighbors = {r: set() for r in range(self.region_count)}
            for a, b in self.entries:
                self.neighbors[a].add(b)
                self.neighbors[b].add(a)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def pairs(self) -> list[Pair]:
        return sorted(self.entries)

    def strengths(self) -> dict[Pair, float]:
        return {k: e.strength for k, e in self.entries.items()}

    def copy(self) -> "SparseBoundaries":
        entries = {k: Boundary(e.strength, e.coords) for k, e in self.entries.items()}
        return SparseBoundaries(self.height, self.width, self.region_count, entries)

    def with_strengths(self, strengths) -> "SparseBoundaries":
        """New table with the same geometry and replaced strengths."""
        entries = {k: Boundary(float(strengths[k]), e.coords) for k, e in self.entries.items()}
        return SparseBoundaries(self.height, self.width, self.region_count, entries)


def _check_shape(height: int, width: int) -> None:
    if height < 1 or width < 1:
        raise PartitionError(f"image must be non-empty, got {height}x{width}")


def grid_shape(height: int, width: int) -> tuple[int, int]:
    return (2 * height - 1, 2 * width - 1)


def stable_mean(values: np.ndarray) -> float:
    """Mean that is exact when all values are equal."""
    return float(_group_means(np.asarray(values, dtype=np.float64), np.zeros(1, dtype=np.int64))[0])


def _group_means(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    # means of contiguous runs, shifted by each run's first value
    counts = np.diff(np.append(starts, len(values)))
    first = values[starts]
    shifted = values - np.repeat(first, counts)
    return first + np.add.reduceat(shifted, starts) / counts


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel so ids follow first appearance in raster order."""
    flat = np.asarray(labels).ravel()
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    return rank[inverse].reshape(np.shape(labels))


def pixel_components(join_right: np.ndarray, join_down: np.ndarray) -> tuple[int, np.ndarray]:
    """4-connected components of the pixel graph restricted to the given joins.

    ``join_right`` is ``H x (W-1)``, ``join_down`` is ``(H-1) x W``.  Returns the
    component count and a canonical label map.
    """
    h, w = join_right.shape[0], join_down.shape[1]
    idx = np.arange(h * w).reshape(h, w)
    src = np.concatenate([idx[:, :-1][join_right], idx[:-1, :][join_down]])
    dst = np.concatenate([idx[:, 1:][join_right], idx[1:, :][join_down]])
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(h * w, h * w))
    n, lab = connected_components(graph, directed=False)
    return n, canonical_labels(lab.reshape(h, w))


def validate_labels(labels) -> np.ndarray:
    """Return ``labels`` as an int64 array or raise :class:`PartitionError`."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise PartitionError(f"label map must be 2-D, got shape {arr.shape}")
    _check_shape(*arr.shape)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise PartitionError("label map holds non-integer ids")
    arr = arr.astype(np.int64)
    if arr.min() < 0:
        raise PartitionError("negative region id")
    r = int(arr.max()) + 1
    present = np.bincount(arr.ravel(), minlength=r)
    if np.any(present == 0):
        missing = np.flatnonzero(present == 0)[:5].tolist()
        raise PartitionError(f"region ids are not contiguous; missing {missing}")
    n, _ = pixel_components(arr[:, :-1] == arr[:, 1:], arr[:-1, :] == arr[1:, :])
    if n != r:
        raise PartitionError(f"{n} connected components for {r} region ids; regions must be 4-connected")
    return arr


def region_count(labels: np.ndarray) -> int:
    return int(np.max(labels)) + 1


def _edgel_table(labels: np.ndarray):
    """All edgels separating different labels, sorted by (pair, row, col)."""
    va, vb = labels[:, :-1], labels[:, 1:]
    vi, vj = np.nonzero(va != vb)
    ha, hb = labels[:-1, :], labels[1:, :]
    hi, hj = np.nonzero(ha != hb)
    a = np.concatenate([va[vi, vj], ha[hi, hj]])
    b = np.concatenate([vb[vi, vj], hb[hi, hj]])
    rows = np.concatenate([2 * vi, 2 * hi + 1])
    cols = np.concatenate([2 * vj + 1, 2 * hj])
    lo, hi_ = np.minimum(a, b), np.maximum(a, b)
    order = np.lexsort((cols, rows, hi_, lo))
    return lo[order], hi_[order], rows[order], cols[order], order


def _group_starts(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    if len(lo) == 0:
        return np.zeros(0, dtype=np.int64)
    change = (np.diff(lo) != 0) | (np.diff(hi) != 0)
    return np.concatenate([[0], np.flatnonzero(change) + 1])


def _entries_from_table(lo, hi, rows, cols, strengths) -> dict[Pair, Boundary]:
    starts = _group_starts(lo, hi)
    coords = np.stack([rows, cols], axis=1).astype(np.int64)
    ends = np.append(starts[1:], len(lo))
    return {
        (int(lo[s]), int(hi[s])): Boundary(float(st), coords[s:e])
        for s, e, st in zip(starts, ends, strengths)
    }


def sparse_from_labels(labels) -> SparseBoundaries:
    """Build the sparse boundary table of a label map, all strengths 0.

    Coordinates inside each entry are in raster order of the boundary grid.
    """
    lab = validate_labels(labels)
    lo, hi, rows, cols, _ = _edgel_table(lab)
    strengths = np.zeros(len(_group_starts(lo, hi)))
    entries = _entries_from_table(lo, hi, rows, cols, strengths)
    return SparseBoundaries(lab.shape[0], lab.shape[1], region_count(lab), entries)


def _fill_junctions(grid: np.ndarray) -> None:
    if grid.shape[0] < 3 or grid.shape[1] < 3:
        return
    grid[1::2, 1::2] = np.maximum.reduce([
        grid[0:-1:2, 1::2], grid[2::2, 1::2],
        grid[1::2, 0:-1:2], grid[1::2, 2::2],
    ])


def dense_from_sparse(sb: SparseBoundaries, labels=None) -> np.ndarray:
    """Write the boundary grid of ``sb``.

    Every edgel carries its entry's strength and every junction the maximum
    of its incident edgels.  If ``labels`` is given, each edgel is checked to
    separate the two regions of its entry.
    """
    _check_shape(sb.height, sb.width)
    grid = np.zeros(grid_shape(sb.height, sb.width))
    lab = None
    if labels is not None:
        lab = np.asarray(labels)
        if lab.shape != sb.shape:
            raise PartitionError(f"label map shape {lab.shape} does not match {sb.shape}")
    keys = list(sb.entries)
    if keys:
        coords = np.concatenate([sb.entries[k].coords for k in keys]).astype(np.int64)
        sizes = np.array([len(sb.entries[k]) for k in keys])
        owner = np.repeat(np.arange(len(keys)), sizes)
        r, c = coords[:, 0], coords[:, 1]
        if r.min() < 0 or c.min() < 0 or r.max() >= grid.shape[0] or c.max() >= grid.shape[1]:
            raise PartitionError("edgel coordinate outside the boundary grid")
        flat = r * grid.shape[1] + c
        uniq, counts = np.unique(flat, return_counts=True)
        if np.any(counts > 1):
            dup = np.flatnonzero(flat == uniq[np.argmax(counts > 1)])[-1]
            raise PartitionError(f"edgel of pair {keys[owner[dup]]} listed twice")
        grid[r, c] = np.repeat([sb.entries[k].strength for k in keys], sizes)
        if lab is not None:
            pairs = np.array(keys, dtype=np.int64)[owner]
            p, q = edgel_pixels(coords)
            la, lb = lab[p[:, 0], p[:, 1]], lab[q[:, 0], q[:, 1]]
            ok = ((la == pairs[:, 0]) & (lb == pairs[:, 1])) | ((la == pairs[:, 1]) & (lb == pairs[:, 0]))
            if not np.all(ok):
                a, b = keys[owner[np.argmin(ok)]]
                raise PartitionError(f"pair {(a, b)} lists an edgel that does not separate its regions")
    _fill_junctions(grid)
    return grid


def edgel_pixels(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The two pixels ``(row, col)`` each edgel separates."""
    coords = np.asarray(coords)
    r, c = coords[:, 0], coords[:, 1]
    vertical = (r % 2) == 0
    p = np.stack([r // 2, c // 2], axis=1)
    q = np.stack([r // 2 + ~vertical, c // 2 + vertical], axis=1)
    return p, q


def validate_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] % 2 == 0 or g.shape[1] % 2 == 0:
        raise PartitionError(f"boundary grid must have odd dimensions, got {g.shape}")
    if not np.all(np.isfinite(g)) or g.min() < 0 or g.max() > 1:
        raise PartitionError("boundary grid values must lie in [0, 1]")
    if np.any(g[0::2, 0::2] != 0):
        raise PartitionError("pixel slots of a boundary grid must be 0")
    return g


def split_grid(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertical (H x W-1) and horizontal (H-1 x W) edgel values."""
    return grid[0::2, 1::2], grid[1::2, 0::2]


def sparse_from_dense(grid) -> tuple[np.ndarray, SparseBoundaries]:
    """Recover the partition and its sparse boundaries from a boundary grid.

    Pixels are joined unless an edgel with value > 0 separates them; junction
    cells are ignored.  Entry strength is the mean of its edgel values.
    Active edgels that end up inside a single region are dropped.
    """
    g = validate_grid(grid)
    vert, horiz = split_grid(g)
    _, labels = pixel_components(vert == 0, horiz == 0)
    lo, hi, rows, cols, _ = _edgel_table(labels)
    starts = _group_starts(lo, hi)
    strengths = _group_means(g[rows, cols], starts) if len(starts) else []
    entries = _entries_from_table(lo, hi, rows, cols, strengths)
    return labels, SparseBoundaries(labels.shape[0], labels.shape[1], region_count(labels), entries)


def erase_boundary(sb: SparseBoundaries, pair: Pair) -> SparseBoundaries:
    """Merge the two regions of ``pair`` in place and return ``sb``.

    The merged region keeps the smaller id.  Boundaries shared with a common
    neighbour are concatenated, their strength becoming the length-weighted
    mean.  The largest id is then moved into the vacated slot so ids stay
    contiguous.  Only entries incident to the merged regions (and to the
    moved id) are touched.
    """
    a, b = pair_key(*pair)
    if (a, b) not in sb.entries:
        raise KeyError(f"no boundary between regions {a} and {b}")
    del sb.entries[(a, b)]
    nbrs = sb.neighbors
    nbrs[a].discard(b)
    nbrs[b].discard(a)
    sb.work += 1
    for x in sorted(nbrs[b]):
        eb = sb.entries.pop(pair_key(b, x))
        nbrs[x].discard(b)
        sb.work += 1
        if x in nbrs[a]:
            ka = pair_key(a, x)
            ea = sb.entries[ka]
            sb.entries[ka] = merge_boundaries(ea, eb)
            sb.work += len(ea) + len(eb)
        else:
            sb.entries[pair_key(a, x)] = eb
            nbrs[a].add(x)
            nbrs[x].add(a)
    del nbrs[b]

    last = sb.region_count - 1
    if b != last:
        moved = nbrs.pop(last)
        for x in moved:
            e = sb.entries.pop(pair_key(last, x))
            sb.entries[pair_key(b, x)] = e
            nbrs[x].discard(last)
            nbrs[x].add(b)
            sb.work += 1
        nbrs[b] = moved
    sb.region_count -= 1
    return sb


def merged_strength(s1: float, n1: int, s2: float, n2: int) -> float:
    """Length-weighted mean of two boundary strengths."""
    return (s1 * n1 + s2 * n2) / (n1 + n2)


def merge_boundaries(e1: Boundary, e2: Boundary) -> Boundary:
    strength = merged_strength(e1.strength, len(e1), e2.strength, len(e2))
    return Boundary(strength, np.concatenate([e1.coords, e2.coords]))


def active_edgel_joins(sb: SparseBoundaries, keep) -> tuple[np.ndarray, np.ndarray]:
    """Pixel joins with the edgels of entries selected by ``keep`` removed."""
    join_right = np.ones((sb.height, sb.width - 1), dtype=bool)
    join_down = np.ones((sb.height - 1, sb.width), dtype=bool)
    for key, e in sb.entries.items():
        if not keep(key, e):
            continue
        r, c = e.coords[:, 0], e.coords[:, 1]
        v = (r % 2) == 0
        join_right[r[v] // 2, c[v] // 2] = False
        join_down[r[~v] // 2, c[~v] // 2] = False
    return join_right, join_down


def binarize(sb: SparseBoundaries, threshold: float) -> np.ndarray:
    """Partition left after erasing every boundary with strength <= threshold.

    Surviving edgels are rasterised and the pixels flood-filled, which is the
    transitive merge of all erased pairs.  Labels are canonical.
    """
    _check_shape(sb.height, sb.width)
    jr, jd = active_edgel_joins(sb, lambda _k, e: e.strength > threshold)
    return pixel_components(jr, jd)[1]


def labels_from_sparse(sb: SparseBoundaries) -> np.ndarray:
    """Reconstruct the label map a boundary table was built on.

    Components are found by flood fill; their ids follow from the pairs on
    their boundaries.  Only a two-region image is symmetric, in which case
    the component met first in raster order gets the smaller id.
    """
    jr, jd = active_edgel_joins(sb, lambda _k, _e: True)
    n, comp = pixel_components(jr, jd)
    if n != sb.region_count:
        raise PartitionError(f"boundaries enclose {n} components, table declares {sb.region_count} regions")
    candidates: list[set[int] | None] = [None] * n
    constraints = []
    for (a, b), e in sb.entries.items():
        p, q = edgel_pixels(e.coords[:1])
        x, y = int(comp[p[0, 0], p[0, 1]]), int(comp[q[0, 0], q[0, 1]])
        if x == y:
            raise PartitionError(f"pair {(a, b)} does not separate two components")
        constraints.append((x, y, a, b))
        for z in (x, y):
            candidates[z] = {a, b} if candidates[z] is None else candidates[z] & {a, b}
    ids = np.full(n, -1, dtype=np.int64)
    if n == 1:
        ids[0] = 0
    for z, cand in enumerate(candidates):
        if cand is not None and len(cand) == 1:
            ids[z] = next(iter(cand))
        elif cand is not None and len(cand) == 0:
            raise PartitionError("inconsistent region pairs around a component")
    changed = True
    while changed:
        changed = False
        for x, y, a, b in constraints:
            for u, v in ((x, y), (y, x)):
                if ids[u] >= 0 and ids[v] < 0:
                    ids[v] = b if ids[u] == a else a
                    changed = True
    if np.any(ids < 0):
        # only the symmetric two-region case is left
        for x, y, a, b in constraints:
            if ids[x] < 0:
                ids[min(x, y)], ids[max(x, y)] = a, b
    for x, y, a, b in constraints:
        if {int(ids[x]), int(ids[y])} != {a, b}:
            raise PartitionError(f"pair {(a, b)} is inconsistent with the reconstructed labels")
    if len(np.unique(ids)) != n:
        raise PartitionError("two components map to the same region id")
    return ids[comp]
