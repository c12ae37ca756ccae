"""Nonlinear reduction: neighborhood graph construction plus SGD layout."""

from .graph import (
    KTooLarge,
    MembershipGraph,
    calibrate,
    fuzzy_union,
    knn_graph,
    membership_graph,
)
from .layout import fit_output_curve, make_epochs_per_sample, optimize_layout
from .reduce import UmapParams, umap_reduce

__all__ = [
    "KTooLarge",
    "MembershipGraph",
    "UmapParams",
    "calibrate",
    "fit_output_curve",
    "fuzzy_union",
    "knn_graph",
    "make_epochs_per_sample",
    "membership_graph",
    "optimize_layout",
    "umap_reduce",
]
