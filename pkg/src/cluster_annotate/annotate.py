"""Human labeling support: per-cluster review cards and label bookkeeping.

A reviewer sees each retained cluster as a card: its size and up to 16
exemplars nearest the cluster's embedding centroid. Labels accumulate in
a revision-counted store; the final export refuses to run while any
non-empty cluster is unnamed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .clustering import Method, run_method
from .consensus import REJECTED, Alignment, ConsensusResult, vote
from .dataio import (
    LabelMap,
    LabelProvenance,
    SampleManifest,
    write_labeled_dataset,
)

EXEMPLAR_LIMIT = 16


@dataclass(frozen=True)
class ClusterManifest:
    """One retained cluster as shown to the reviewer."""

    cluster_index: int
    size: int
    member_ids: tuple[str, ...]
    exemplar_ids: tuple[str, ...]  # nearest-centroid first
    label: str | None = None

    def to_dict(self) -> dict:
        return {
            "cluster_index": self.cluster_index,
            "size": self.size,
            "member_ids": list(self.member_ids),
            "exemplar_ids": list(self.exemplar_ids),
            "label": self.label,
        }


def build_manifests(consensus: ConsensusResult, embedding) -> list[ClusterManifest]:
    """Partition retained samples into per-cluster cards.

    Exemplars are the <= 16 members closest to the cluster's embedding
    centroid, ascending distance, ties toward the smaller sample id.
    Clusters are listed by ascending index; empty ones are skipped.
    """
    if tuple(embedding.ids) != tuple(consensus.ids):
        raise ValueError("embedding ids do not match consensus ids")
    data = np.asarray(embedding.data, dtype=np.float64)
    members: dict[int, list[int]] = {}
    for row, cluster in enumerate(consensus.assignment):
        if cluster != REJECTED:
            members.setdefault(int(cluster), []).append(row)

    cards = []
    for cluster in sorted(members):
        rows = members[cluster]
        centroid = data[rows].mean(axis=0)
        dist = np.linalg.norm(data[rows] - centroid, axis=1)
        ranked = sorted(
            range(len(rows)), key=lambda p: (dist[p], consensus.ids[rows[p]])
        )
        exemplars = tuple(consensus.ids[rows[p]] for p in ranked[:EXEMPLAR_LIMIT])
        cards.append(
            ClusterManifest(
                cluster_index=cluster,
                size=len(rows),
                member_ids=tuple(consensus.ids[r] for r in rows),
                exemplar_ids=exemplars,
            )
        )
    return cards


def with_labels(cards: list[ClusterManifest], labels: dict[int, str]) -> list[ClusterManifest]:
    return [replace(c, label=labels.get(c.cluster_index)) for c in cards]


def sweep_clusters(
    embedding,
    counts,
    methods=(Method.KMEANS, Method.AGG, Method.BIRCH),
    seed: int = 0,
    reference: Method = Method.KMEANS,
    alignment: Alignment = Alignment.OPTIMAL,
    truth: SampleManifest | None = None,
) -> list[dict]:
    """Run the full vote at several cluster counts.

    Returns one row per count: reject rate, number of non-empty clusters,
    review cards, and (when truth is supplied) oracle accuracy. Helps pick
    the over-clustering resolution before any human labeling happens.
    """
    from .evaluation import evaluate, majority_label_map

    methods = [Method(m) for m in methods]
    ref_index = methods.index(Method(reference))
    rows = []
    for k in counts:
        if k < 2:
            raise ValueError(f"cluster counts must be >= 2, got {k}")
        clusterings = [run_method(m, embedding, int(k), seed=seed) for m in methods]
        consensus = vote(clusterings, embedding.ids, ref_index, alignment)
        cards = build_manifests(consensus, embedding)
        row = {
            "k_over": int(k),
            "reject_rate": 100.0 * consensus.reject_rate,
            "clusters": len(cards),
            "manifests": cards,
        }
        if truth is not None:
            report = evaluate(consensus, majority_label_map(consensus, truth), truth)
            row["accuracy"] = report.overall_accuracy
        rows.append(row)
    return rows


def apply_label_map(consensus: ConsensusResult, labels: LabelMap) -> list[tuple[str, str]]:
    """(sample id, label) for every retained sample, input order.

    Many clusters may share one label; that is how over-clustering folds
    back to real classes. Raises MissingLabel on an unlabeled cluster.
    """
    out = []
    for sid, cluster in zip(consensus.ids, consensus.assignment):
        if cluster != REJECTED:
            out.append((sid, labels.label_for(int(cluster))))
    return out


def unlabeled_clusters(consensus: ConsensusResult, labels: dict[int, str]) -> list[int]:
    """Non-empty clusters still missing a label, ascending."""
    present = sorted({int(c) for c in consensus.assignment if c != REJECTED})
    return [c for c in present if c not in labels]


class LabelStore:
    """Last-write-wins label assignments with a monotone revision counter.

    Revision 0 is the empty store; every successful set or delete bumps
    it by one, so clients can detect concurrent edits.
    """

    def __init__(self):
        self._labels: dict[int, str] = {}
        self._revision = 0

    @property
    def revision(self) -> int:
        return self._revision

    def labels(self) -> dict[int, str]:
        return dict(self._labels)

    def get(self, cluster_index: int) -> str | None:
        return self._labels.get(cluster_index)

    def set_label(self, cluster_index: int, label: str) -> int:
        if not isinstance(label, str) or not label.strip():
            raise ValueError("label must be a non-empty string")
        self._labels[int(cluster_index)] = label.strip()
        self._revision += 1
        return self._revision

    def delete_label(self, cluster_index: int) -> int:
        if int(cluster_index) in self._labels:
            del self._labels[int(cluster_index)]
        self._revision += 1
        return self._revision

    def to_label_map(self) -> LabelMap:
        return LabelMap(dict(self._labels), LabelProvenance.HUMAN)


class UnlabeledClusters(ValueError):
    """Finalize refused: some non-empty clusters have no label."""

    def __init__(self, clusters: list[int]):
        super().__init__(f"unlabeled clusters: {clusters}")
        self.clusters = clusters


def finalize(
    consensus: ConsensusResult,
    manifest: SampleManifest,
    labels: LabelMap,
    path,
) -> int:
    """Write the labeled dataset, fail-closed.

    Every non-empty cluster must be labeled; rejected ids are listed,
    never labeled. Re-running with the same inputs rewrites byte-identical
    output. Returns the labeled-sample count.
    """
    missing = unlabeled_clusters(consensus, labels.entries)
    if missing:
        raise UnlabeledClusters(missing)
    return write_labeled_dataset(manifest, consensus, labels, path)
