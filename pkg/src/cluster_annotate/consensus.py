"""Cluster-label alignment and unanimity voting.

Different clusterings name the same groups with different indices. Each
non-reference clustering is aligned to the reference by a bijection that
maximizes overlap mass on the contingency table; samples whose aligned
labels disagree anywhere are rejected rather than guessed at.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .clustering import Clustering, Method, clustering_to_dict
from .dataio import dump_json, json_text, load_json

REJECTED = -1


class LengthMismatch(ValueError):
    """Clusterings cover different numbers of samples."""


class MismatchedK(ValueError):
    """Clusterings disagree on the number of clusters."""


class NonSquare(ValueError):
    """Optimal alignment needs a square contingency table."""


class Alignment(str, Enum):
    OPTIMAL = "OPTIMAL"
    GREEDY = "GREEDY"


def contingency(ref: Clustering, other: Clustering) -> np.ndarray:
    """Count matrix: entry [a, b] = samples in ref cluster a and other
    cluster b."""
    if ref.n != other.n:
        raise LengthMismatch(f"{ref.n} vs {other.n} samples")
    table = np.zeros((ref.k, other.k), dtype=np.int64)
    np.add.at(table, (ref.assignment, other.assignment), 1)
    return table


def _hungarian_min(cost: list[list[int]]) -> list[int]:
    """Exact min-cost perfect matching on a square integer matrix.

    Shortest-augmenting-path formulation with potentials, O(n^3). Works
    on arbitrary-precision ints, which the lexicographic encoding in
    `align` relies on. Returns row assigned to each column.
    """
    n = len(cost)
    INF = (max(max(row) for row in cost) + 1) * (n + 2)
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    p = [0] * (n + 1)  # p[j] = row matched to column j (1-based, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    return [p[j] - 1 for j in range(1, n + 1)]


def align(table: np.ndarray, method: Alignment = Alignment.OPTIMAL) -> np.ndarray:
    """Bijection other-cluster -> ref-cluster maximizing overlap mass.

    OPTIMAL solves the assignment exactly; among equal-mass optima it
    returns the lexicographically smallest mapping array. That is encoded
    directly into the objective: profits are scaled by k^k and a
    per-cell preference bonus (k-1-a) * k^(k-1-b) is added, so one exact
    big-integer solve settles both criteria. GREEDY repeatedly takes the
    largest remaining entry (ties toward the smallest (a, b)).
    """
    T = np.asarray(table)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise NonSquare(f"table must be square, got {T.shape}")
    if np.any(T < 0):
        raise ValueError("contingency counts must be non-negative")
    k = T.shape[0]
    method = Alignment(method)

    if method is Alignment.GREEDY:
        mapping = np.full(k, -1, dtype=np.int64)
        used_a = set()
        used_b = set()
        order = sorted(
            ((a, b) for a in range(k) for b in range(k)),
            key=lambda ab: (-int(T[ab[0], ab[1]]), ab[0], ab[1]),
        )
        for a, b in order:
            if a in used_a or b in used_b:
                continue
            mapping[b] = a
            used_a.add(a)
            used_b.add(b)
        return mapping

    S = k**k
    # cost[b][a]: Hungarian matches columns of the table (rows here) to rows
    best = 0
    profit = [[0] * k for _ in range(k)]
    for a in range(k):
        bonus_a = k - 1 - a
        for b in range(k):
            val = int(T[a, b]) * S + bonus_a * k ** (k - 1 - b)
            profit[b][a] = val
            if val > best:
                best = val
    cost = [[best - profit[b][a] for a in range(k)] for b in range(k)]
    rows_for_cols = _hungarian_min(cost)
    # column a of `cost` got row b: invert to mapping[b] = a
    mapping = np.empty(k, dtype=np.int64)
    for a, b in enumerate(rows_for_cols):
        mapping[b] = a
    return mapping


def alignment_mass(table: np.ndarray, mapping: np.ndarray) -> int:
    """Total overlap the mapping captures."""
    return int(sum(int(table[mapping[b], b]) for b in range(len(mapping))))


@dataclass(frozen=True)
class ConsensusResult:
    """Per-sample unanimity verdict in reference label space."""

    ids: tuple[str, ...]
    assignment: np.ndarray  # (n,) int64, cluster in [0, k) or REJECTED
    k: int
    reference: Method
    sources: str  # digest of the voted clusterings

    def __post_init__(self):
        arr = np.ascontiguousarray(self.assignment, dtype=np.int64)
        ids = tuple(self.ids)
        if arr.ndim != 1 or len(ids) != arr.shape[0]:
            raise ValueError("ids and assignment must align")
        if arr.size and (arr.min() < REJECTED or arr.max() >= self.k):
            raise ValueError("assignment entries must be REJECTED or in [0, k)")
        arr.setflags(write=False)
        object.__setattr__(self, "assignment", arr)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "reference", Method(self.reference))

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    @property
    def rejected_count(self) -> int:
        return int((self.assignment == REJECTED).sum())

    @property
    def retained_count(self) -> int:
        return self.n - self.rejected_count

    @property
    def reject_rate(self) -> float:
        return self.rejected_count / self.n

    def retained_ids(self) -> tuple[str, ...]:
        return tuple(
            sid for sid, c in zip(self.ids, self.assignment) if c != REJECTED
        )


def sources_digest(clusterings) -> str:
    blob = json_text([clustering_to_dict(c) for c in clusterings])
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def vote(
    clusterings,
    ids,
    reference_index: int = 0,
    alignment: Alignment = Alignment.OPTIMAL,
) -> ConsensusResult:
    """Unanimity vote across aligned clusterings.

    A sample is retained iff every clusterer, after alignment onto the
    reference, puts it in the same cluster. Requires >= 2 clusterings of
    equal n and equal k.
    """
    clusterings = list(clusterings)
    if len(clusterings) < 2:
        raise ValueError("vote needs at least two clusterings")
    ref = clusterings[reference_index]
    n = ref.n
    ids = tuple(ids)
    if len(ids) != n:
        raise LengthMismatch(f"{len(ids)} ids for {n} samples")
    for c in clusterings:
        if c.n != n:
            raise LengthMismatch(f"{c.n} vs {n} samples")
        if c.k != ref.k:
            raise MismatchedK(f"{c.k} vs {ref.k} clusters")

    unanimous = np.ones(n, dtype=bool)
    for idx, c in enumerate(clusterings):
        if idx == reference_index:
            continue
        mapping = align(contingency(ref, c), alignment)
        aligned = mapping[c.assignment]
        unanimous &= aligned == ref.assignment
    assignment = np.where(unanimous, ref.assignment, REJECTED)
    return ConsensusResult(
        ids=ids,
        assignment=assignment,
        k=ref.k,
        reference=ref.method,
        sources=sources_digest(clusterings),
    )


def consensus_to_dict(result: ConsensusResult) -> dict:
    per_sample = []
    for sid, c in zip(result.ids, result.assignment):
        if c == REJECTED:
            per_sample.append({"id": sid, "status": "REJECTED", "cluster": None})
        else:
            per_sample.append({"id": sid, "status": "RETAINED", "cluster": int(c)})
    return {
        "reference": result.reference.value,
        "k": result.k,
        "reject_rate": result.reject_rate,
        "sources": result.sources,
        "per_sample": per_sample,
    }


def write_consensus(result: ConsensusResult, path) -> None:
    dump_json(consensus_to_dict(result), path)


def load_consensus(path) -> ConsensusResult:
    obj = load_json(path)
    ids = tuple(row["id"] for row in obj["per_sample"])
    assignment = np.array(
        [REJECTED if row["status"] == "REJECTED" else int(row["cluster"]) for row in obj["per_sample"]],
        dtype=np.int64,
    )
    result = ConsensusResult(
        ids=ids,
        assignment=assignment,
        k=int(obj["k"]),
        reference=Method(obj["reference"]),
        sources=obj["sources"],
    )
    if result.reject_rate != obj["reject_rate"]:
        raise ValueError("stored reject_rate disagrees with per-sample statuses")
    return result
