"""K-means: distance-weighted seeding plus Lloyd iterations, best of n_init."""

from __future__ import annotations

import numpy as np

from . import Clustering, KTooLarge, Method, data_of


def _sq_dists_to(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances."""
    d2 = (
        np.einsum("ij,ij->i", X, X)[:, None]
        + np.einsum("ij,ij->i", centers, centers)[None, :]
        - 2.0 * (X @ centers.T)
    )
    return np.maximum(d2, 0.0)


def kmeans_plusplus(X, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seed k centers: first uniform, rest weighted by squared distance."""
    A = data_of(X)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k must be in [1, {n}], got {k}")
    centers = np.empty((k, A.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    idx = int(rng.integers(n))
    centers[0] = A[idx]
    chosen[idx] = True
    best_d2 = _sq_dists_to(A, centers[:1])[:, 0]
    for c in range(1, k):
        total = best_d2.sum()
        if total > 0:
            probs = best_d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            # all remaining points coincide with a center
            idx = int(rng.choice(np.flatnonzero(~chosen)))
        centers[c] = A[idx]
        chosen[idx] = True
        best_d2 = np.minimum(best_d2, _sq_dists_to(A, centers[c : c + 1])[:, 0])
    return centers


def lloyd(X, centers: np.ndarray, max_iter: int = 300, tol: float = 1e-4):
    """Refine centers until the largest center shift drops below tol.

    Empty clusters are re-seeded to the point farthest from its assigned
    center. Returns (labels, centers, inertia, history) where history is
    the inertia after each assignment pass; it never increases.
    """
    A = data_of(X)
    centers = np.array(centers, dtype=np.float64)
    k = centers.shape[0]
    history = []
    labels = None
    for _ in range(max_iter):
        d2 = _sq_dists_to(A, centers)
        labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(A.shape[0]), labels]
        for c in range(k):
            if not np.any(labels == c):
                far = int(point_d2.argmax())
                centers[c] = A[far]
                labels[far] = c
                point_d2[far] = 0.0
        history.append(float(point_d2.sum()))
        new_centers = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centers[c] = A[members].mean(axis=0)
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    d2 = _sq_dists_to(A, centers)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(A.shape[0]), labels].sum())
    history.append(inertia)
    return labels.astype(np.int64), centers, inertia, history


def kmeans(X, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 300, tol: float = 1e-4) -> Clustering:
    """Best-of-n_init k-means. Deterministic per seed; ties keep the
    earliest restart."""
    A = data_of(X)
    if not 1 <= k <= A.shape[0]:
        raise KTooLarge(f"k must be in [1, {A.shape[0]}], got {k}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers0 = kmeans_plusplus(A, k, rng)
        labels, _, inertia, _ = lloyd(A, centers0, max_iter=max_iter, tol=tol)
        if best is None or inertia < best[1]:
            best = (labels, inertia)
    return Clustering(
        method=Method.KMEANS, k=k, assignment=best[0], seed=seed, inertia=best[1]
    )
