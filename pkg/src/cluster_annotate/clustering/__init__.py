"""Three clustering methods over the same embedding, one shared result type."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..dataio import dump_json, load_json


class Method(str, Enum):
    KMEANS = "KMEANS"
    AGG = "AGG"
    BIRCH = "BIRCH"


class KTooLarge(ValueError):
    """Requested more clusters than the data can support."""


@dataclass(frozen=True)
class Clustering:
    """Hard assignment of n samples to k clusters."""

    method: Method
    k: int
    assignment: np.ndarray  # (n,) int64 in [0, k)
    seed: int = 0
    inertia: float | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.assignment, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("assignment must be 1-D")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if arr.size and (arr.min() < 0 or arr.max() >= self.k):
            raise ValueError(f"assignment values must lie in [0, {self.k})")
        arr.setflags(write=False)
        object.__setattr__(self, "assignment", arr)
        object.__setattr__(self, "method", Method(self.method))

    @property
    def n(self) -> int:
        return self.assignment.shape[0]


def clustering_to_dict(c: Clustering) -> dict:
    obj = {
        "method": c.method.value,
        "k": c.k,
        "seed": c.seed,
        "assignment": [int(v) for v in c.assignment],
    }
    if c.inertia is not None:
        obj["inertia"] = float(c.inertia)
    return obj


def write_clustering(c: Clustering, path) -> None:
    dump_json(clustering_to_dict(c), path)


def load_clustering(path) -> Clustering:
    obj = load_json(path)
    return Clustering(
        method=Method(obj["method"]),
        k=int(obj["k"]),
        assignment=np.array(obj["assignment"], dtype=np.int64),
        seed=int(obj["seed"]),
        inertia=obj.get("inertia"),
    )


def data_of(X) -> np.ndarray:
    """Accept a ReducedEmbedding/FeatureMatrix or a bare array."""
    return np.asarray(getattr(X, "data", X), dtype=np.float64)


from .agglomerative import Linkage, agglomerative, ward_tree  # noqa: E402
from .birch import CFEntry, CFTree, auto_threshold, birch, birch_auto  # noqa: E402
from .kmeans import kmeans, kmeans_plusplus, lloyd  # noqa: E402


def run_method(method: Method, X, k: int, seed: int = 0, *, n_init: int = 10,
               max_iter: int = 300, birch_threshold: float | None = None,
               branching_factor: int = 50, linkage: "Linkage | None" = None) -> Clustering:
    """Dispatch one clustering method with its own knobs.

    With no explicit birch_threshold the heuristic one is refined until it
    supports k; an explicit value is used as given and may fail.
    """
    method = Method(method)
    if method is Method.KMEANS:
        return kmeans(X, k, seed=seed, n_init=n_init, max_iter=max_iter)
    if method is Method.AGG:
        return agglomerative(X, k, linkage=linkage or Linkage.WARD)
    if method is Method.BIRCH:
        if birch_threshold is None:
            return birch_auto(X, k, branching_factor=branching_factor, seed=seed)
        return birch(X, k, birch_threshold, branching_factor=branching_factor)
    raise ValueError(f"unknown method {method}")


__all__ = [
    "CFEntry",
    "CFTree",
    "Clustering",
    "KTooLarge",
    "Linkage",
    "Method",
    "agglomerative",
    "auto_threshold",
    "birch",
    "birch_auto",
    "clustering_to_dict",
    "data_of",
    "kmeans",
    "kmeans_plusplus",
    "lloyd",
    "load_clustering",
    "run_method",
    "ward_tree",
    "write_clustering",
]
