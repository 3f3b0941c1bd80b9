"""Exact ball-tree nearest-neighbor index.

Nodes are (centroid, radius) balls stored in flat arrays; leaves partition
the point set.  Construction splits on the dimension with the widest
spread at the median, so the tree is balanced and deterministic for a
fixed input order.  Queries prune a depth-first search with the triangle
inequality - a node whose ball cannot contain anything closer than the
current k-th best is skipped - and therefore return exactly the
brute-force result.  Equal distances are ordered by each point's key
(e.g. its content hash), which keeps results reproducible across tree
shapes.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyIndex, InvalidConfig

DEFAULT_LEAF_SIZE = 40


@dataclass
class QueryStats:
    nodes_visited: int = 0


class BallTree:
    """Exact Euclidean nearest-neighbor tree over an (n, dim) point set.

    ``keys`` supplies the deterministic tie-break order (ascending) for
    equal distances; it defaults to the point index.  The tree is
    immutable after construction and safe for concurrent queries.
    """

    def __init__(self, points: np.ndarray, keys=None, leaf_size: int = DEFAULT_LEAF_SIZE):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise EmptyIndex("need a non-empty (n, dim) point array")
        if leaf_size < 1:
            raise InvalidConfig("leaf size must be >= 1")
        self.points = pts
        self.n, self.dim = pts.shape
        self.leaf_size = leaf_size
        self.keys = list(keys) if keys is not None else list(range(self.n))
        if len(self.keys) != self.n:
            raise InvalidConfig("one key per point required")

        self._index = np.arange(self.n, dtype=np.intp)
        centroids: list[np.ndarray] = []
        radii: list[float] = []
        starts: list[int] = []
        ends: list[int] = []
        children: list[tuple[int, int]] = []  # (-1, -1) marks a leaf

        stack = [(0, self.n, 0)]
        centroids.append(np.empty(self.dim))
        radii.append(0.0)
        starts.append(0)
        ends.append(self.n)
        children.append((-1, -1))

        while stack:
            start, end, node = stack.pop()
            member_idx = self._index[start:end]
            members = pts[member_idx]
            centroid = members.mean(axis=0)
            radius = float(np.sqrt(((members - centroid) ** 2).sum(axis=1)).max())
            centroids[node] = centroid
            radii[node] = radius
            starts[node] = start
            ends[node] = end

            count = end - start
            if count <= leaf_size:
                children[node] = (-1, -1)
                continue

            spread = members.max(axis=0) - members.min(axis=0)
            split_dim = int(np.argmax(spread))
            mid = start + count // 2
            order = np.argpartition(members[:, split_dim], count // 2)
            self._index[start:end] = member_idx[order]

            left, right = len(centroids), len(centroids) + 1
            for _ in range(2):
                centroids.append(np.empty(self.dim))
                radii.append(0.0)
                starts.append(0)
                ends.append(0)
                children.append((-1, -1))
            children[node] = (left, right)
            stack.append((start, mid, left))
            stack.append((mid, end, right))

        self.centroids = np.asarray(centroids)
        self.radii = np.asarray(radii)
        self.starts = np.asarray(starts, dtype=np.intp)
        self.ends = np.asarray(ends, dtype=np.intp)
        self.children = np.asarray(children, dtype=np.intp)

    @property
    def n_nodes(self) -> int:
        return len(self.radii)

    def audit_containment(self) -> bool:
        """Check every point lies inside its node's ball, for all nodes."""
        for node in range(self.n_nodes):
            idx = self._index[self.starts[node] : self.ends[node]]
            dists = np.sqrt(((self.points[idx] - self.centroids[node]) ** 2).sum(axis=1))
            if dists.size and dists.max() > self.radii[node] * (1 + 1e-12) + 1e-12:
                return False
        return True

    def query(self, q: np.ndarray, k: int = 1, stats: QueryStats | None = None):
        """Exact k nearest neighbors of ``q``.

        Returns (indices, distances) ordered by (distance, key) ascending;
        ``k`` is clamped to the index size.  ``stats`` (optional) receives
        the number of nodes expanded during the search.
        """
        q = np.asarray(q, dtype=np.float64).ravel()
        if q.size != self.dim:
            raise DimensionMismatch(f"query dim {q.size} != index dim {self.dim}")
        if k < 1:
            raise InvalidConfig("k must be >= 1")
        k = min(k, self.n)

        # best holds (distance, key, point_index), kept sorted ascending
        best: list[tuple[float, object, int]] = []

        def lower_bound(node: int) -> float:
            d = float(np.sqrt(((q - self.centroids[node]) ** 2).sum()))
            return max(0.0, d - self.radii[node])

        stack = [(lower_bound(0), 0)]
        while stack:
            lb, node = stack.pop()
            if len(best) == k and lb > best[-1][0]:
                continue  # ball cannot beat the current k-th best
            if stats is not None:
                stats.nodes_visited += 1
            left, right = self.children[node]
            if left < 0:
                idx = self._index[self.starts[node] : self.ends[node]]
                dists = np.sqrt(((self.points[idx] - q) ** 2).sum(axis=1))
                for d, i in zip(dists, idx):
                    entry = (float(d), self.keys[i], int(i))
                    if len(best) < k:
                        insort(best, entry)
                    elif entry < best[-1]:
                        insort(best, entry)
                        best.pop()
            else:
                lb_left, lb_right = lower_bound(left), lower_bound(right)
                # push the farther child first so the nearer is explored next
                if lb_left <= lb_right:
                    stack.append((lb_right, right))
                    stack.append((lb_left, left))
                else:
                    stack.append((lb_left, left))
                    stack.append((lb_right, right))

        indices = np.array([e[2] for e in best], dtype=np.intp)
        distances = np.array([e[0] for e in best])
        return indices, distances


def brute_force_query(points: np.ndarray, keys, q: np.ndarray, k: int):
    """Linear-scan oracle with the same (distance, key) ordering."""
    pts = np.asarray(points, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64).ravel()
    dists = np.sqrt(((pts - q) ** 2).sum(axis=1))
    order = sorted(range(len(pts)), key=lambda i: (dists[i], keys[i]))[: min(k, len(pts))]
    idx = np.array(order, dtype=np.intp)
    return idx, dists[idx]
