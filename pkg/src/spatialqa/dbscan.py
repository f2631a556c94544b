"""Density-based clustering used to clean up segmented object point clouds.

Semantics are pinned so that results are a pure function of the point
multiset (order-independent):

  * a point's eps-neighborhood includes the point itself, radius inclusive;
  * core points are those with at least ``min_pts`` neighbors;
  * clusters are connected components of core points under eps-adjacency;
  * a border point joins the cluster of its nearest core neighbor (distance
    ties broken by the core point's lexicographically smallest coordinates);
  * everything else is noise.

The implementation bins points into grid cells of side eps/sqrt(dim), so
every within-cell pair is automatically within eps: neighbor counting
runs as vectorized cell-block distance computations, core connectivity
needs one union per cell plus one per connected cell pair, and the whole
pass stays far from the O(n^2) reference used to verify it in tests.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import EmptyObjectError, ObjectPointCloud

NOISE = -1


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


_KEY_SHIFT = 21  # packs per-axis cell indices into one int64


class _CellGrid:
    """Points bucketed into cubic cells whose diagonal is at most eps."""

    def __init__(self, pts: np.ndarray, eps: float):
        self.pts = pts
        self.eps = eps
        dim = pts.shape[1]
        # cells fully inside the radius: shrink to avoid diagonal overflow
        self.cell = eps / math.sqrt(dim) * (1.0 - 1e-12)
        keys = np.floor(pts / self.cell).astype(np.int64) + (1 << (_KEY_SHIFT - 1))
        # margin keeps neighbor-offset arithmetic from crossing bit fields
        if keys.min() < 8 or keys.max() >= (1 << _KEY_SHIFT) - 8:
            raise ValueError("point spread too large for the cell grid")
        packed = np.zeros(len(pts), dtype=np.int64)
        for axis in range(dim):
            packed = (packed << _KEY_SHIFT) | keys[:, axis]
        self.packed_sorted, inverse = np.unique(packed, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        sorted_inverse = inverse[order]
        boundaries = np.searchsorted(sorted_inverse,
                                     np.arange(len(self.packed_sorted) + 1))
        self.members = [order[boundaries[i]:boundaries[i + 1]]
                        for i in range(len(self.packed_sorted))]
        reach = math.ceil(eps / self.cell)
        dims = [np.arange(-reach, reach + 1)] * dim
        offsets = np.stack(np.meshgrid(*dims, indexing="ij"),
                           axis=-1).reshape(-1, dim)
        # drop offsets whose nearest corner already exceeds eps
        nearest = np.maximum(np.abs(offsets) - 1, 0) * self.cell
        offsets = offsets[(nearest ** 2).sum(axis=1) <= eps * eps]
        deltas = np.zeros(len(offsets), dtype=np.int64)
        for axis in range(dim):
            deltas = (deltas << _KEY_SHIFT) + offsets[:, axis]
        self.offset_deltas = deltas

    def neighbor_cells(self, cell_id: int) -> np.ndarray:
        cand = self.packed_sorted[cell_id] + self.offset_deltas
        pos = np.searchsorted(self.packed_sorted, cand)
        pos[pos >= len(self.packed_sorted)] = 0
        hit = self.packed_sorted[pos] == cand
        return np.unique(pos[hit])


def dbscan_labels(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Cluster labels per point; -1 marks noise.

    Label numbering follows each cluster's lexicographically smallest
    member so the labeling itself is order-independent.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return np.empty(0, dtype=int)

    grid = _CellGrid(pts, eps)
    eps2 = eps * eps
    n_cells = len(grid.members)
    neighbor_lists = [grid.neighbor_cells(c) for c in range(n_cells)]
    sq_norm = (pts ** 2).sum(axis=1)

    def dist2_block(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        block = sq_norm[rows][:, None] + sq_norm[cols][None, :] \
            - 2.0 * (pts[rows] @ pts[cols].T)
        np.maximum(block, 0.0, out=block)
        return block

    # pass 1: neighbor counts -> core points
    counts = np.zeros(n, dtype=np.int64)
    for c in range(n_cells):
        mine = grid.members[c]
        cand = np.concatenate([grid.members[nb] for nb in neighbor_lists[c]])
        counts[mine] = (dist2_block(mine, cand) <= eps2).sum(axis=1)
    core = counts >= min_pts

    # pass 2: connectivity; whole cells are cliques, so one union joins a
    # cell's cores and one union joins each eps-close core cell pair
    uf = _UnionFind(n)
    cell_core_rep = np.full(n_cells, -1, dtype=np.int64)
    for c in range(n_cells):
        cores_here = grid.members[c][core[grid.members[c]]]
        if len(cores_here):
            cell_core_rep[c] = cores_here[0]
            for i in cores_here[1:]:
                uf.union(int(cores_here[0]), int(i))
    for c in range(n_cells):
        rep = cell_core_rep[c]
        if rep < 0:
            continue
        mine = grid.members[c][core[grid.members[c]]]
        for nb in neighbor_lists[c]:
            if nb <= c or cell_core_rep[nb] < 0:
                continue
            others = grid.members[nb][core[grid.members[nb]]]
            if (dist2_block(mine, others) <= eps2).any():
                uf.union(int(rep), int(cell_core_rep[nb]))

    labels = np.full(n, NOISE, dtype=int)
    roots: dict[int, list[int]] = {}
    for i in np.nonzero(core)[0]:
        roots.setdefault(uf.find(int(i)), []).append(int(i))

    def cluster_key(members):
        member_pts = pts[members]
        order = np.lexsort(member_pts.T[::-1])
        return tuple(member_pts[order[0]])

    ordered = sorted(roots.values(), key=cluster_key)
    for cid, members in enumerate(ordered):
        labels[members] = cid

    # pass 3: border points join their nearest core neighbor
    for c in range(n_cells):
        mine = grid.members[c][~core[grid.members[c]]]
        if not len(mine):
            continue
        cand = np.concatenate([grid.members[nb] for nb in neighbor_lists[c]])
        cand = cand[core[cand]]
        if not len(cand):
            continue
        d2 = dist2_block(mine, cand)
        d2[d2 > eps2] = np.inf
        best = d2.min(axis=1)
        for row, i in enumerate(mine):
            if not np.isfinite(best[row]):
                continue
            ties = cand[d2[row] == best[row]]
            if len(ties) > 1:
                tie_pts = pts[ties]
                ties = ties[np.lexsort(tie_pts.T[::-1])]
            labels[i] = labels[ties[0]]
    return labels


def dbscan_largest_cluster(pc: ObjectPointCloud, eps: float,
                           min_pts: int) -> ObjectPointCloud:
    """Return the cluster with the most points; noise never survives.

    Size ties go to the cluster with the lexicographically smallest member
    so the selection is independent of point order.
    """
    labels = dbscan_labels(pc.points, eps, min_pts)
    valid = labels >= 0
    if not valid.any():
        raise EmptyObjectError(
            f"object {pc.object_id!r}: all {len(pc)} points classified noise"
        )
    counts = np.bincount(labels[valid])
    best = int(np.argmax(counts))  # argmax takes the lowest id on ties,
    # and ids are ordered by smallest member
    keep = labels == best
    return ObjectPointCloud(object_id=pc.object_id, points=pc.points[keep],
                            source_pixels=pc.source_pixels)


def default_eps(points: np.ndarray, fraction: float = 0.05) -> float:
    """Scale-free default: a fraction of the cloud's bounding diagonal."""
    pts = np.asarray(points, dtype=float)
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return max(fraction * diag, 1e-6)


def default_min_pts(n_points: int, fraction: float = 0.005,
                    cap: int = 40) -> int:
    """max(5, 0.5% of points), capped.

    The cap matters for dense clouds: the count-proportional term would
    otherwise outgrow the eps-ball occupancy of obliquely viewed surfaces
    and misclassify whole faces as noise.
    """
    return max(5, min(cap, int(round(fraction * n_points))))
