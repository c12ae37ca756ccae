"""CF-tree clustering: one-pass summarization, then a global merge.

Phase 1 streams points into a height-balanced tree of clustering
features (N, LS, SS); a point is absorbed by its nearest leaf entry iff
the entry's radius stays within the threshold, otherwise it opens a new
entry, splitting nodes that exceed the branching factor. Phase 2 runs
size-weighted Ward over the leaf-entry centroids.
"""

from __future__ import annotations

import logging

import numpy as np

from . import Clustering, KTooLarge, Method, data_of
from .agglomerative import cut_assignment, ward_tree

log = logging.getLogger("cluster_annotate")


class BadThreshold(ValueError):
    """Threshold must be a positive finite number."""


class KTooLargeForLeaves(KTooLarge):
    """The tree produced fewer leaf entries than requested clusters."""


class CFEntry:
    """Clustering feature of one subcluster: count, linear sum, square sum."""

    __slots__ = ("n", "ls", "ss")

    def __init__(self, point: np.ndarray | None = None, dim: int | None = None):
        if point is not None:
            point = np.asarray(point, dtype=np.float64)
            self.n = 1
            self.ls = point.copy()
            self.ss = float(point @ point)
        else:
            self.n = 0
            self.ls = np.zeros(dim, dtype=np.float64)
            self.ss = 0.0

    def add_point(self, point: np.ndarray) -> None:
        self.n += 1
        self.ls = self.ls + point
        self.ss += float(point @ point)

    def add_entry(self, other: "CFEntry") -> None:
        self.n += other.n
        self.ls = self.ls + other.ls
        self.ss += other.ss

    def merged(self, other: "CFEntry") -> "CFEntry":
        out = CFEntry(dim=self.ls.shape[0])
        out.add_entry(self)
        out.add_entry(other)
        return out

    @property
    def centroid(self) -> np.ndarray:
        return self.ls / self.n

    @property
    def radius(self) -> float:
        # RMS distance of members to the centroid; clamp float cancellation
        c = self.centroid
        return float(np.sqrt(max(self.ss / self.n - float(c @ c), 0.0)))

    def radius_if_added(self, point: np.ndarray) -> float:
        n = self.n + 1
        ls = self.ls + point
        ss = self.ss + float(point @ point)
        c = ls / n
        return float(np.sqrt(max(ss / n - float(c @ c), 0.0)))


class CFNode:
    __slots__ = ("is_leaf", "entries", "children", "cf")

    def __init__(self, is_leaf: bool, dim: int):
        self.is_leaf = is_leaf
        self.entries: list[CFEntry] = []
        self.children: list[CFNode] = []
        self.cf = CFEntry(dim=dim)

    def items(self):
        return self.entries if self.is_leaf else self.children

    def item_centroid(self, idx: int) -> np.ndarray:
        item = self.items()[idx]
        return item.centroid if self.is_leaf else item.cf.centroid


def _nearest(centroids: np.ndarray, point: np.ndarray) -> int:
    d2 = np.einsum("ij,ij->i", centroids - point, centroids - point)
    return int(d2.argmin())  # ties -> smaller index


class CFTree:
    """Phase-1 tree. Points are tracked by the leaf entry that absorbed
    them, and entry objects survive node splits, so the mapping stays
    valid for phase 2."""

    def __init__(self, threshold: float, branching_factor: int, dim: int):
        if not np.isfinite(threshold) or threshold <= 0:
            raise BadThreshold(f"threshold must be positive and finite, got {threshold}")
        if branching_factor < 2:
            raise ValueError("branching_factor must be >= 2")
        self.threshold = float(threshold)
        self.branching_factor = int(branching_factor)
        self.dim = dim
        self.root = CFNode(is_leaf=True, dim=dim)
        self.point_entries: list[CFEntry] = []

    @classmethod
    def build(cls, X, threshold: float, branching_factor: int = 50) -> "CFTree":
        A = data_of(X)
        tree = cls(threshold, branching_factor, A.shape[1])
        for row in A:
            tree.insert(row)
        return tree

    def insert(self, point: np.ndarray) -> None:
        point = np.asarray(point, dtype=np.float64)
        path = []
        node = self.root
        while not node.is_leaf:
            path.append(node)
            cents = np.array([c.cf.centroid for c in node.children])
            node = node.children[_nearest(cents, point)]

        entry = None
        if node.entries:
            cents = np.array([e.centroid for e in node.entries])
            best = _nearest(cents, point)
            if node.entries[best].radius_if_added(point) <= self.threshold:
                entry = node.entries[best]
                entry.add_point(point)
        if entry is None:
            entry = CFEntry(point)
            node.entries.append(entry)
        self.point_entries.append(entry)

        node.cf.add_point(point)
        for anc in path:
            anc.cf.add_point(point)

        if len(node.entries) > self.branching_factor:
            self._split_up(path, node)

    def _split_up(self, path: list[CFNode], node: CFNode) -> None:
        while len(node.items()) > self.branching_factor:
            left, right = self._split(node)
            if path:
                parent = path.pop()
                pos = parent.children.index(node)
                parent.children[pos : pos + 1] = [left, right]
                node = parent
            else:
                new_root = CFNode(is_leaf=False, dim=self.dim)
                new_root.children = [left, right]
                new_root.cf = left.cf.merged(right.cf)
                self.root = new_root
                return

    def _split(self, node: CFNode) -> tuple["CFNode", "CFNode"]:
        """Farthest-pair seeding, nearest-seed assignment."""
        items = node.items()
        cents = np.array([node.item_centroid(i) for i in range(len(items))])
        sq = np.einsum("ij,ij->i", cents, cents)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (cents @ cents.T)
        sa, sb = divmod(int(d2.argmax()), len(items))  # ties -> smallest pair
        if sa == sb:
            sb = (sa + 1) % len(items)  # all centroids coincide
        left = CFNode(is_leaf=node.is_leaf, dim=self.dim)
        right = CFNode(is_leaf=node.is_leaf, dim=self.dim)
        da = np.einsum("ij,ij->i", cents - cents[sa], cents - cents[sa])
        db = np.einsum("ij,ij->i", cents - cents[sb], cents - cents[sb])
        for idx, item in enumerate(items):
            if idx == sa:
                side = left
            elif idx == sb:
                side = right
            else:
                side = left if da[idx] <= db[idx] else right
            side.items().append(item)
            side.cf.add_entry(item if node.is_leaf else item.cf)
        return left, right

    def leaf_nodes(self) -> list[CFNode]:
        out = []

        def walk(node):
            if node.is_leaf:
                out.append(node)
            else:
                for child in node.children:
                    walk(child)

        walk(self.root)
        return out

    def leaf_entries(self) -> list[CFEntry]:
        return [e for leaf in self.leaf_nodes() for e in leaf.entries]


def auto_threshold(X, seed: int = 0, pairs: int = 100) -> float:
    """Half the mean distance of `pairs` seeded random point pairs."""
    A = data_of(X)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(pairs):
        i = int(rng.integers(n))
        j = int(rng.integers(n))
        while j == i:
            j = int(rng.integers(n))
        total += float(np.linalg.norm(A[i] - A[j]))
    return max(0.5 * total / pairs, 1e-6)


def birch(X, k: int, threshold: float, branching_factor: int = 50, seed: int = 0) -> Clustering:
    """Two-phase CF-tree clustering to exactly k clusters.

    `seed` is provenance only (the threshold derivation may be seeded);
    the algorithm itself is deterministic.
    """
    A = data_of(X)
    if not 1 <= k <= A.shape[0]:
        raise KTooLarge(f"k must be in [1, {A.shape[0]}], got {k}")
    tree = CFTree.build(A, threshold, branching_factor)
    entries = tree.leaf_entries()
    m = len(entries)
    if m < k:
        raise KTooLargeForLeaves(
            f"tree has {m} leaf entries for k={k}; lower the threshold"
        )
    centroids = np.array([e.centroid for e in entries])
    weights = np.array([e.n for e in entries], dtype=np.float64)
    merges = ward_tree(centroids, weights=weights)
    entry_label = cut_assignment(m, merges, k)
    pos = {id(e): i for i, e in enumerate(entries)}
    assignment = np.array(
        [entry_label[pos[id(e)]] for e in tree.point_entries], dtype=np.int64
    )
    return Clustering(method=Method.BIRCH, k=k, assignment=assignment, seed=seed)


def birch_auto(X, k: int, branching_factor: int = 50, seed: int = 0, retries: int = 20) -> Clustering:
    """birch() from the heuristic threshold, halving it until k is reachable.

    The heuristic can land too coarse for a large k; each retry doubles the
    tree resolution. An explicitly chosen threshold should call birch()
    directly so a deliberate setting is never second-guessed.
    """
    threshold = auto_threshold(X, seed=seed)
    for _ in range(retries):
        try:
            return birch(X, k, threshold, branching_factor, seed=seed)
        except KTooLargeForLeaves:
            threshold /= 2.0
            log.info("birch threshold halved to %g", threshold)
    raise KTooLargeForLeaves(
        f"birch cannot reach k={k} even at threshold {threshold}"
    )
