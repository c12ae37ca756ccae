"""Fuzzy neighborhood graph: exact kNN, per-point calibration, symmetric union.

Each point gets a local distance scale (rho = nearest-neighbor distance,
sigma = smooth bandwidth) such that its k neighbors carry log2(k) total
membership. Directed memberships are then combined with the probabilistic
t-conorm a + b - a*b, which makes the graph exactly symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SMOOTH_TOLERANCE = 1e-5
SMOOTH_ITERATIONS = 64
MIN_SCALE = 1e-3  # sigma clamp, relative to the mean row distance
MAX_SCALE = 1e3
SIGMA_FLOOR = 1e-8  # absolute floor for rows whose distances are all zero


class KTooLarge(ValueError):
    """k must satisfy 2 <= k < n."""


def _check_k(k: int, n: int) -> None:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k >= n:
        raise KTooLarge(f"k must be < n, got k={k} with n={n}")


def knn_graph(X, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbors under Euclidean distance, self excluded.

    Returns (indices, distances), both (n, k), neighbors sorted by
    ascending distance with ties resolved toward the smaller index.
    """
    A = np.asarray(getattr(X, "data", X), dtype=np.float64)
    n = A.shape[0]
    _check_k(k, n)
    sq = np.einsum("ij,ij->i", A, A)
    indices = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    step = max(1, int(2**26 // max(n, 1)))  # ~512MB ceiling on the chunk
    for start in range(0, n, step):
        stop = min(start + step, n)
        block = sq[start:stop, None] + sq[None, :] - 2.0 * (A[start:stop] @ A.T)
        np.maximum(block, 0.0, out=block)
        np.sqrt(block, out=block)
        for row in range(start, stop):
            block[row - start, row] = np.inf
        order = np.argsort(block, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        dists[start:stop] = np.take_along_axis(block, order, axis=1)
    return indices, dists


def calibrate(distances: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve per-row smooth bandwidths against the log2(k) mass target.

    For each row solves sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)
    by bisection (64 rounds, residual tolerance 1e-5), where rho is the
    smallest strictly positive neighbor distance (0 if none). Sigma is
    clamped to [1e-3, 1e3] times the row's mean neighbor distance, with an
    absolute floor for all-zero rows. Returns (rho, sigma, clamped) where
    `clamped` flags rows whose sigma hit a clamp bound.
    """
    d = np.asarray(distances, dtype=np.float64)
    n = d.shape[0]
    if d.shape[1] != k:
        raise ValueError(f"expected {k} neighbor distances per row, got {d.shape[1]}")
    target = np.log2(k)

    pos = np.where(d > 0.0, d, np.inf)
    rho = np.min(pos, axis=1)
    rho[~np.isfinite(rho)] = 0.0

    shifted = np.maximum(d - rho[:, None], 0.0)

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    sigma = np.ones(n)
    for _ in range(SMOOTH_ITERATIONS):
        val = np.exp(-shifted / np.maximum(sigma[:, None], 1e-300)).sum(axis=1)
        too_high = val > target
        # mass too high -> narrow the kernel; too low -> widen it
        hi = np.where(too_high, sigma, hi)
        lo = np.where(too_high, lo, sigma)
        # bisect once both bounds exist, double upward until then
        sigma = np.where(np.isfinite(hi), (lo + hi) / 2.0, sigma * 2.0)

    mean_row = d.mean(axis=1)
    lo_bound = np.maximum(MIN_SCALE * mean_row, SIGMA_FLOOR)
    hi_bound = np.maximum(MAX_SCALE * mean_row, SIGMA_FLOOR)
    clamped = (sigma < lo_bound) | (sigma > hi_bound)
    sigma = np.clip(sigma, lo_bound, hi_bound)
    return rho, sigma, clamped


def directed_weights(distances: np.ndarray, rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Membership of each directed edge: exp(-max(0, d - rho) / sigma)."""
    shifted = np.maximum(np.asarray(distances, dtype=np.float64) - rho[:, None], 0.0)
    return np.exp(-shifted / sigma[:, None])


@dataclass(frozen=True)
class MembershipGraph:
    """Symmetric weighted graph over n points.

    Edges are stored once per unordered pair {i, j} with i < j, sorted by
    (i, j). rho/sigma/clamped keep the per-point calibration for
    diagnostics.
    """

    n: int
    k: int
    heads: np.ndarray  # (e,) int64, i < j
    tails: np.ndarray  # (e,) int64
    weights: np.ndarray  # (e,) float64 in (0, 1]
    rho: np.ndarray
    sigma: np.ndarray
    clamped: np.ndarray

    def __post_init__(self):
        for name in ("heads", "tails", "weights", "rho", "sigma", "clamped"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return self.heads.shape[0]

    def to_dense(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        W[self.heads, self.tails] = self.weights
        W[self.tails, self.heads] = self.weights
        return W

    def edge_list(self) -> list[dict]:
        return [
            {"i": int(i), "j": int(j), "w": float(w)}
            for i, j, w in zip(self.heads, self.tails, self.weights)
        ]


def fuzzy_union(indices: np.ndarray, weights: np.ndarray, rho, sigma, clamped, k: int) -> MembershipGraph:
    """Combine directed memberships into a symmetric graph.

    For each unordered pair with directed weights a and b (0 when absent),
    the symmetric weight is a + b - a*b.
    """
    n = indices.shape[0]
    directed: dict[tuple[int, int], float] = {}
    for i in range(n):
        row_idx = indices[i]
        row_w = weights[i]
        for j, w in zip(row_idx, row_w):
            directed[(i, int(j))] = float(w)
    merged: dict[tuple[int, int], float] = {}
    for (i, j), a in directed.items():
        key = (i, j) if i < j else (j, i)
        if key in merged:
            continue
        b = directed.get((j, i), 0.0)
        merged[key] = a + b - a * b
    pairs = sorted(merged)
    heads = np.array([p[0] for p in pairs], dtype=np.int64)
    tails = np.array([p[1] for p in pairs], dtype=np.int64)
    w = np.array([merged[p] for p in pairs], dtype=np.float64)
    return MembershipGraph(
        n=n,
        k=k,
        heads=heads,
        tails=tails,
        weights=w,
        rho=np.asarray(rho, dtype=np.float64),
        sigma=np.asarray(sigma, dtype=np.float64),
        clamped=np.asarray(clamped, dtype=bool),
    )


def membership_graph(X, k: int) -> MembershipGraph:
    """kNN + calibration + fuzzy union in one call."""
    indices, dists = knn_graph(X, k)
    rho, sigma, clamped = calibrate(dists, k)
    w = directed_weights(dists, rho, sigma)
    return fuzzy_union(indices, w, rho, sigma, clamped, k)
