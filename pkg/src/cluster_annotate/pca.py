"""Linear reduction: exact PCA plus the eigenvalue-ratio elbow rule.

The elbow rule picks the output dimensionality m by maximizing the drop
between consecutive eigenvalues, which is where the explained-variance
curve bends hardest.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import (
    FeatureMatrix,
    ReducedEmbedding,
    dump_json,
    load_json,
    read_fmat,
    write_fmat,
)


class DegenerateInput(ValueError):
    """All rows identical: no variance to decompose."""


class EmptyRange(ValueError):
    """Elbow search range [min_dims, max_dims] is empty."""


class DimTooLarge(ValueError):
    """Requested more output dimensions than the model holds."""


@dataclass(frozen=True)
class PcaModel:
    """Centering vector plus orthonormal components sorted by eigenvalue."""

    mean: np.ndarray  # (d,) float64
    components: np.ndarray  # (m, d) float64, orthonormal rows
    eigenvalues: np.ndarray  # (m,) float64, descending, >= 0

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        comps = np.ascontiguousarray(self.components, dtype=np.float64)
        ev = np.ascontiguousarray(self.eigenvalues, dtype=np.float64)
        if mean.ndim != 1 or comps.ndim != 2 or ev.ndim != 1:
            raise ValueError("bad model shapes")
        if comps.shape != (ev.shape[0], mean.shape[0]):
            raise ValueError("components shape must be (m, d)")
        if np.any(ev < 0) or np.any(np.diff(ev) > 0):
            raise ValueError("eigenvalues must be non-negative and descending")
        for name, arr in (("mean", mean), ("components", comps), ("eigenvalues", ev)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def _as_array(X) -> np.ndarray:
    if isinstance(X, (FeatureMatrix, ReducedEmbedding)):
        return X.data
    return np.asarray(X)


def _ids_of(X) -> tuple[str, ...] | None:
    return getattr(X, "ids", None)


def _complete_basis(valid: np.ndarray, d: int, extra: int) -> np.ndarray:
    """Deterministic orthonormal fill for directions with zero variance.

    Orthogonalizes standard basis vectors against the rows of `valid`
    (and each other) until `extra` unit vectors are collected.
    """
    rows = [v for v in valid]
    out = []
    for j in range(d):
        if len(out) == extra:
            break
        e = np.zeros(d)
        e[j] = 1.0
        for v in rows:
            e -= np.dot(v, e) * v
        norm = np.linalg.norm(e)
        if norm > 1e-6:
            e /= norm
            rows.append(e)
            out.append(e)
    if len(out) < extra:
        raise ValueError("could not complete an orthonormal basis")
    return np.array(out)


def pca_fit(X, max_dims: int) -> PcaModel:
    """Exact PCA of the (n-1)-normalized covariance, keeping max_dims axes.

    Decomposes the d x d covariance when d <= n, otherwise the n x n Gram
    matrix (same nonzero spectrum, cheaper). Requires
    1 <= max_dims <= min(n - 1, d).
    """
    A = np.asarray(_as_array(X), dtype=np.float64)
    n, d = A.shape
    limit = min(n - 1, d)
    if not 1 <= max_dims <= limit:
        raise ValueError(f"max_dims must be in [1, {limit}], got {max_dims}")
    mean = A.mean(axis=0)
    C = A - mean
    if not np.any(C):
        raise DegenerateInput("all rows are identical")

    if d <= n:
        cov = (C.T @ C) / (n - 1)
        ev, vecs = np.linalg.eigh(cov)
        order = np.argsort(ev, kind="stable")[::-1]
        ev = ev[order][:max_dims]
        comps = vecs[:, order][:, :max_dims].T
    else:
        gram = (C @ C.T) / (n - 1)
        ev, vecs = np.linalg.eigh(gram)
        order = np.argsort(ev, kind="stable")[::-1]
        ev = ev[order][:max_dims]
        u = vecs[:, order][:, :max_dims]
        # left singular directions: components_i = C^T u_i / sqrt((n-1) ev_i)
        tol = max(ev[0], 0.0) * 1e-12
        good = ev > tol
        comps = np.zeros((max_dims, d))
        if good.any():
            scale = np.sqrt((n - 1) * ev[good])
            comps[good] = (C.T @ u[:, good] / scale).T
        if not good.all():
            comps[~good] = _complete_basis(comps[good], d, int((~good).sum()))

    ev = np.clip(ev, 0.0, None)
    return PcaModel(mean=mean, components=comps, eigenvalues=ev)


def pca_transform(model: PcaModel, X, m: int) -> ReducedEmbedding:
    """Project X - mean onto the first m components."""
    if not 1 <= m <= model.m:
        raise DimTooLarge(f"m must be in [1, {model.m}], got {m}")
    A = np.asarray(_as_array(X), dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != model.d:
        raise ValueError(f"expected {model.d} columns, got {A.shape}")
    proj = (A - model.mean) @ model.components[:m].T
    ids = _ids_of(X)
    if ids is None:
        ids = tuple(f"row-{i:06d}" for i in range(A.shape[0]))
    return ReducedEmbedding(proj.astype(np.float32), ids)


def elbow_select(eigenvalues, min_dims: int, max_dims: int) -> int:
    """Pick m in [min_dims, max_dims] maximizing eigenvalue_m / eigenvalue_{m+1}.

    Indices are 1-based counts of retained components. The denominator is
    regularized by 1e-12 * max(eigenvalues) so the choice is invariant to
    scaling the whole spectrum; ties resolve to the smallest m.
    """
    ev = np.asarray(eigenvalues, dtype=np.float64)
    if ev.ndim != 1 or np.any(ev < 0) or np.any(np.diff(ev) > 0):
        raise ValueError("eigenvalues must be 1-D, non-negative, descending")
    if min_dims < 1:
        raise ValueError("min_dims must be >= 1")
    if max_dims > len(ev) - 1:
        raise ValueError(f"max_dims must leave a successor eigenvalue, got {max_dims} for {len(ev)}")
    if min_dims > max_dims:
        raise EmptyRange(f"empty elbow range [{min_dims}, {max_dims}]")
    eps = 1e-12 * float(ev[0]) if ev[0] > 0 else 1e-12
    best_m = min_dims
    best_ratio = -np.inf
    for m in range(min_dims, max_dims + 1):
        ratio = ev[m - 1] / (ev[m] + eps)
        if ratio > best_ratio:
            best_ratio = ratio
            best_m = m
    return best_m


def save_pca_model(model: PcaModel, prefix) -> None:
    """Write <prefix>.components.fmat, <prefix>.eigenvalues.fmat, <prefix>.json."""
    prefix = Path(prefix)
    names = tuple(f"component-{i:04d}" for i in range(model.m))
    write_fmat(model.components.astype(np.float32), names, f"{prefix}.components.fmat")
    write_fmat(model.eigenvalues.astype(np.float32).reshape(-1, 1), names, f"{prefix}.eigenvalues.fmat")
    meta = {
        "d": model.d,
        "m": model.m,
        # mean kept at float64 precision; JSON round-trips repr exactly
        "mean": [float(v) for v in model.mean],
    }
    dump_json(meta, f"{prefix}.json")


def load_pca_model(prefix) -> PcaModel:
    prefix = Path(prefix)
    comps, _ = read_fmat(f"{prefix}.components.fmat")
    ev, _ = read_fmat(f"{prefix}.eigenvalues.fmat")
    meta = load_json(f"{prefix}.json")
    return PcaModel(
        mean=np.array(meta["mean"], dtype=np.float64),
        components=comps.astype(np.float64),
        eigenvalues=ev.reshape(-1).astype(np.float64),
    )
