"""Benchmarking against known labels.

Synthetic Gaussian blobs (with a uniform-noise fraction) stand in for a
feature extractor; the majority oracle replays the human labeling step by
naming each cluster after its most frequent true label; evaluate() scores
the result the way a curation run is judged: per-class precision and
overall accuracy over retained samples, rejection reported separately.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .clustering import Method, run_method
from .consensus import REJECTED, Alignment, ConsensusResult, sources_digest, vote
from .dataio import (
    FeatureMatrix,
    LabelMap,
    LabelProvenance,
    SampleManifest,
    SampleRecord,
)


class NoRetainedSamples(ValueError):
    """Every sample was rejected; no clusters left to name."""


class MissingTrueLabel(ValueError):
    """A retained sample has no ground-truth label in the manifest."""


@dataclass(frozen=True)
class BlobSpec:
    """Isotropic Gaussian classes plus a contaminating uniform fraction."""

    classes: int = 4
    per_class: int = 250
    dim: int = 64
    sigma: float = 1.0
    noise_fraction: float = 0.0
    centers: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.classes < 1 or self.per_class < 1 or self.dim < 1:
            raise ValueError("classes, per_class, dim must all be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ValueError("noise_fraction must be in [0, 1)")
        if self.centers is not None:
            c = np.asarray(self.centers, dtype=np.float64)
            if c.shape != (self.classes, self.dim):
                raise ValueError(f"centers must be ({self.classes}, {self.dim})")
            object.__setattr__(self, "centers", c)


def make_blobs(spec: BlobSpec) -> tuple[FeatureMatrix, SampleManifest]:
    """Sample the benchmark. Noise points get uniform coordinates over the
    clean data's bounding box but keep their true class label, so they
    mostly count against accuracy unless rejected."""
    rng = np.random.default_rng(spec.seed)
    centers = spec.centers
    if centers is None:
        centers = rng.standard_normal((spec.classes, spec.dim))
    n = spec.classes * spec.per_class

    points = np.empty((n, spec.dim))
    labels = []
    for c in range(spec.classes):
        sl = slice(c * spec.per_class, (c + 1) * spec.per_class)
        points[sl] = centers[c] + spec.sigma * rng.standard_normal((spec.per_class, spec.dim))
        labels.extend([f"class_{c:02d}"] * spec.per_class)

    n_noise = int(round(spec.noise_fraction * n))
    if n_noise:
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        noisy = rng.choice(n, size=n_noise, replace=False)
        points[noisy] = lo + (hi - lo) * rng.random((n_noise, spec.dim))

    ids = tuple(f"sample-{i:05d}" for i in range(n))
    matrix = FeatureMatrix(points.astype(np.float32), ids)
    records = tuple(
        SampleRecord(
            id=ids[i],
            source_path=f"blob://{labels[i]}/{i:05d}",
            true_label=labels[i],
        )
        for i in range(n)
    )
    return matrix, SampleManifest(records)


def majority_label_map(consensus: ConsensusResult, truth: SampleManifest) -> LabelMap:
    """Name each retained cluster after its most frequent true label.

    Count ties resolve to the lexicographically smallest label. Clusters
    with no retained samples get no entry.
    """
    truth_by_id = truth.true_labels()
    counts: dict[int, dict[str, int]] = {}
    for sid, cluster in zip(consensus.ids, consensus.assignment):
        if cluster == REJECTED:
            continue
        label = truth_by_id.get(sid)
        if label is None:
            raise MissingTrueLabel(f"no true label for retained sample {sid}")
        by_label = counts.setdefault(int(cluster), {})
        by_label[label] = by_label.get(label, 0) + 1
    if not counts:
        raise NoRetainedSamples("consensus rejected every sample")
    entries = {}
    for cluster, by_label in counts.items():
        entries[cluster] = min(by_label.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return LabelMap(entries, LabelProvenance.MAJORITY_ORACLE)


@dataclass(frozen=True)
class EvaluationReport:
    """Confusion counts over retained samples plus summary percentages."""

    labels: tuple[str, ...]  # axis for both true (rows) and assigned (cols)
    confusion: np.ndarray  # (L, L) int64
    per_class_precision: dict[str, float]  # percent, per assigned label
    overall_accuracy: float  # percent over retained
    reject_rate: float  # percent of all samples
    retained_count: int
    total_count: int

    def to_text(self) -> str:
        out = io.StringIO()
        width = max([len("true\\assigned")] + [len(s) for s in self.labels]) + 2
        out.write("true\\assigned".ljust(width))
        for lab in self.labels:
            out.write(lab.rjust(width))
        out.write("\n")
        for i, lab in enumerate(self.labels):
            out.write(lab.ljust(width))
            for j in range(len(self.labels)):
                out.write(str(int(self.confusion[i, j])).rjust(width))
            out.write("\n")
        out.write("\n")
        for lab in self.labels:
            if lab in self.per_class_precision:
                out.write(f"precision[{lab}] = {self.per_class_precision[lab]:.1f}%\n")
        out.write(f"overall accuracy = {self.overall_accuracy:.1f}%\n")
        out.write(
            f"rejected = {self.total_count - self.retained_count}/{self.total_count}"
            f" ({self.reject_rate:.1f}%)\n"
        )
        return out.getvalue()

    def to_json_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "per_class_precision": {
                lab: self.per_class_precision[lab] for lab in self.labels if lab in self.per_class_precision
            },
            "overall_accuracy": self.overall_accuracy,
            "reject_rate": self.reject_rate,
            "retained": self.retained_count,
            "total": self.total_count,
        }

    def confusion_csv(self) -> str:
        out = io.StringIO()
        out.write("true\\assigned," + ",".join(self.labels) + "\n")
        for i, lab in enumerate(self.labels):
            out.write(lab + "," + ",".join(str(int(v)) for v in self.confusion[i]) + "\n")
        return out.getvalue()


def evaluate(consensus: ConsensusResult, labels: LabelMap, truth: SampleManifest) -> EvaluationReport:
    """Score retained samples against ground truth.

    Rows are true labels, columns assigned labels, over the sorted union
    of both label sets. Precision is per assigned label (column);
    rejected samples never enter the confusion matrix.
    """
    truth_by_id = truth.true_labels()
    pairs = []  # (true, assigned)
    for sid, cluster in zip(consensus.ids, consensus.assignment):
        if cluster == REJECTED:
            continue
        true_label = truth_by_id.get(sid)
        if true_label is None:
            raise MissingTrueLabel(f"no true label for retained sample {sid}")
        pairs.append((true_label, labels.label_for(int(cluster))))
    if not pairs:
        raise NoRetainedSamples("consensus rejected every sample")

    axis = tuple(sorted({t for t, _ in pairs} | {a for _, a in pairs}))
    index = {lab: i for i, lab in enumerate(axis)}
    conf = np.zeros((len(axis), len(axis)), dtype=np.int64)
    for t, a in pairs:
        conf[index[t], index[a]] += 1

    precision = {}
    for lab in axis:
        j = index[lab]
        col = int(conf[:, j].sum())
        if col:
            precision[lab] = 100.0 * int(conf[j, j]) / col

    retained = len(pairs)
    total = consensus.n
    return EvaluationReport(
        labels=axis,
        confusion=conf,
        per_class_precision=precision,
        overall_accuracy=100.0 * int(np.trace(conf)) / retained,
        reject_rate=100.0 * (total - retained) / total,
        retained_count=retained,
        total_count=total,
    )


def _single_as_consensus(clustering, ids) -> ConsensusResult:
    """Wrap one clustering as an all-retained consensus so it can be
    scored with the same oracle + evaluate path as the vote."""
    return ConsensusResult(
        ids=tuple(ids),
        assignment=clustering.assignment,
        k=clustering.k,
        reference=clustering.method,
        sources=sources_digest([clustering]),
    )


def compare_single_vs_vote(
    embedding,
    truth: SampleManifest,
    k: int,
    methods=(Method.KMEANS, Method.AGG, Method.BIRCH),
    seed: int = 0,
    reference: Method = Method.KMEANS,
    alignment: Alignment = Alignment.OPTIMAL,
    n_init: int = 10,
) -> list[dict]:
    """Score each method alone, then the unanimity vote, on one embedding.

    Single methods reject nothing and are named by their own majority
    oracle, so the table isolates what the vote adds. Returns one row per
    method plus a final "VOTE" row, each with accuracy and reject_rate
    percentages.
    """
    methods = [Method(m) for m in methods]
    ids = embedding.ids
    clusterings = [run_method(m, embedding, k, seed=seed, n_init=n_init) for m in methods]
    rows = []
    for m, c in zip(methods, clusterings):
        single = _single_as_consensus(c, ids)
        report = evaluate(single, majority_label_map(single, truth), truth)
        rows.append(
            {
                "name": m.value,
                "accuracy": report.overall_accuracy,
                "reject_rate": report.reject_rate,
            }
        )
    consensus = vote(
        clusterings, ids, reference_index=methods.index(Method(reference)), alignment=alignment
    )
    report = evaluate(consensus, majority_label_map(consensus, truth), truth)
    rows.append(
        {
            "name": "VOTE",
            "accuracy": report.overall_accuracy,
            "reject_rate": report.reject_rate,
        }
    )
    return rows
