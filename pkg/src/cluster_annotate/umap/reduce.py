"""Top-level nonlinear reduction: graph construction then layout."""

from __future__ import annotations

from dataclasses import dataclass

from ..dataio import FeatureMatrix, ReducedEmbedding
from .graph import membership_graph
from .layout import optimize_layout


@dataclass(frozen=True)
class UmapParams:
    n_neighbors: int = 15
    out_dims: int = 200
    epochs: int = 200
    min_dist: float = 0.1
    spread: float = 1.0
    negative_sample_rate: int = 5
    repulsion_strength: float = 1.0

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")
        if self.out_dims < 1 or self.epochs < 1:
            raise ValueError("out_dims and epochs must be >= 1")
        if self.min_dist < 0 or self.spread <= 0:
            raise ValueError("need min_dist >= 0 and spread > 0")
        if self.negative_sample_rate < 1:
            raise ValueError("negative_sample_rate must be >= 1")


def umap_reduce(X: FeatureMatrix, params: UmapParams = UmapParams(), seed: int = 0) -> ReducedEmbedding:
    """Embed X into params.out_dims dimensions. Deterministic per seed."""
    graph = membership_graph(X, params.n_neighbors)
    return optimize_layout(
        graph,
        out_dims=params.out_dims,
        epochs=params.epochs,
        seed=seed,
        min_dist=params.min_dist,
        spread=params.spread,
        negative_sample_rate=params.negative_sample_rate,
        repulsion_strength=params.repulsion_strength,
        ids=X.ids,
    )
