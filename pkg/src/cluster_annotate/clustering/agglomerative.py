"""Bottom-up agglomeration with Lance-Williams merge-cost updates.

Ward's criterion merges the pair whose union raises total within-cluster
variance the least: cost(A, B) = |A||B| / (|A| + |B|) * ||mu_A - mu_B||^2.
The full n x n cost matrix is kept in memory, which is fine at desk scale
(a few thousand points).
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import Clustering, KTooLarge, Method, data_of


class Linkage(str, Enum):
    WARD = "WARD"
    COMPLETE = "COMPLETE"
    AVERAGE = "AVERAGE"


def _initial_costs(A: np.ndarray, sizes: np.ndarray, linkage: Linkage) -> np.ndarray:
    sq = np.einsum("ij,ij->i", A, A)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (A @ A.T)
    np.maximum(d2, 0.0, out=d2)
    if linkage is Linkage.WARD:
        s = sizes.astype(np.float64)
        cost = (s[:, None] * s[None, :]) / (s[:, None] + s[None, :]) * d2
    else:
        cost = np.sqrt(d2)
    np.fill_diagonal(cost, np.inf)
    return cost


def _lw_update(cost, sizes, i, j, linkage):
    """Cost row for the merged cluster (i u j) against every other cluster."""
    if linkage is Linkage.WARD:
        ni, nj, nc = sizes[i], sizes[j], sizes
        total = ni + nj + nc
        return ((ni + nc) * cost[i] + (nj + nc) * cost[j] - nc * cost[i, j]) / total
    if linkage is Linkage.COMPLETE:
        return np.maximum(cost[i], cost[j])
    # average linkage: size-weighted mean of the two rows
    ni, nj = sizes[i], sizes[j]
    return (ni * cost[i] + nj * cost[j]) / (ni + nj)


def ward_tree(X, weights=None, linkage: Linkage = Linkage.WARD):
    """Full merge sequence down to one cluster.

    Returns a list of (i, j, cost) with i < j referring to current cluster
    slots: j's members fold into slot i. Ward costs are non-decreasing
    over the sequence.

    `weights` treats each input row as a pre-merged cluster of that size,
    which is what the CF-tree global step needs.
    """
    A = data_of(X)
    n = A.shape[0]
    sizes = np.ones(n, dtype=np.float64) if weights is None else np.asarray(weights, dtype=np.float64)
    if sizes.shape != (n,) or np.any(sizes < 1):
        raise ValueError("weights must be one count >= 1 per row")
    cost = _initial_costs(A, sizes, linkage)
    merges = []
    for _ in range(n - 1):
        flat = int(np.argmin(cost))  # row-major argmin = smallest (i, j) on ties
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        merges.append((i, j, float(cost[i, j])))
        new_row = _lw_update(cost, sizes, i, j, linkage)
        cost[i, :] = new_row
        cost[:, i] = new_row
        cost[i, i] = np.inf
        cost[j, :] = np.inf
        cost[:, j] = np.inf
        sizes[i] += sizes[j]
    return merges


def cut_assignment(n: int, merges, k: int) -> np.ndarray:
    """Labels after the first n - k merges, relabeled by ascending smallest
    member index."""
    parent = np.arange(n)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in merges[: n - k]:
        parent[find(j)] = find(i)
    roots = {}
    labels = np.empty(n, dtype=np.int64)
    for p in range(n):
        r = find(p)
        if r not in roots:
            roots[r] = len(roots)
        labels[p] = roots[r]
    return labels


def agglomerative(X, k: int, linkage: Linkage = Linkage.WARD) -> Clustering:
    """Merge until k clusters remain; ties pick the smallest (i, j)."""
    A = data_of(X)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k must be in [1, {n}], got {k}")
    merges = ward_tree(A, linkage=Linkage(linkage))
    return Clustering(
        method=Method.AGG, k=k, assignment=cut_assignment(n, merges, k), seed=0
    )
