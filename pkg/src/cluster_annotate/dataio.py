"""On-disk formats shared by every stage.

Binary feature matrices (.fmat), sample manifests, label maps, and the
final labeled-dataset export. All writers produce canonical bytes: writing
the result of a load reproduces the original file exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

MAGIC = b"FMAT"
FORMAT_VERSION = 1

# magic, version, n, d
_HEADER = struct.Struct("<4sIQQ")
_U64 = struct.Struct("<Q")


class FormatError(ValueError):
    """Malformed .fmat file. `offset` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagic(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class NonFiniteValue(FormatError):
    pass


class MissingLabel(KeyError):
    """A retained cluster has no label entry."""

    def __init__(self, cluster_index: int):
        super().__init__(cluster_index)
        self.cluster_index = cluster_index

    def __str__(self):
        return f"no label for retained cluster {self.cluster_index}"


def _check_ids(ids, n):
    if len(ids) != n:
        raise ValueError(f"got {len(ids)} ids for {n} rows")
    if any(not s for s in ids):
        raise ValueError("sample ids must be non-empty")
    if len(set(ids)) != n:
        raise ValueError("sample ids must be unique")


def _freeze(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d row-major float32 matrix with one id per row."""

    data: np.ndarray
    ids: tuple[str, ...]

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        n, d = data.shape
        if n < 2 or d < 1:
            raise ValueError(f"need n >= 2 rows and d >= 1 columns, got {n}x{d}")
        if not np.isfinite(data).all():
            raise ValueError("feature matrix contains non-finite values")
        ids = tuple(self.ids)
        _check_ids(ids, n)
        object.__setattr__(self, "data", _freeze(data, np.float32))
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ReducedEmbedding:
    """Low-dimensional rows aligned 1:1 with a source FeatureMatrix."""

    data: np.ndarray
    ids: tuple[str, ...]
    seed: int = 0

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError("embedding must be 2-D")
        if not np.isfinite(data).all():
            raise ValueError("embedding contains non-finite values")
        ids = tuple(self.ids)
        _check_ids(ids, data.shape[0])
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "data", _freeze(data, np.float32))
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


# -- .fmat binary format ------------------------------------------------
#
# offset 0   : 4 bytes magic "FMAT"
# offset 4   : u32 version (= 1)
# offset 8   : u64 n
# offset 16  : u64 d
# offset 24  : n*d little-endian IEEE-754 float32, row-major
# offset 24+4nd : u64 byte length of the id block
# offset 32+4nd : id block, UTF-8 ids joined by "\n"


def fmat_bytes(data: np.ndarray, ids) -> bytes:
    """Serialize a 2-D float32 array + ids to canonical .fmat bytes."""
    data = np.ascontiguousarray(data, dtype="<f4")
    n, d = data.shape
    id_block = "\n".join(ids).encode("utf-8")
    return b"".join(
        [
            _HEADER.pack(MAGIC, FORMAT_VERSION, n, d),
            data.tobytes(order="C"),
            _U64.pack(len(id_block)),
            id_block,
        ]
    )


def read_fmat(path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Parse an .fmat file into (float32 array, ids).

    Format-level reader: shape invariants beyond n*d consistency are the
    caller's business. Raises BadMagic / VersionMismatch / TruncatedFile /
    NonFiniteValue, each naming the byte offset of the problem.
    """
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise TruncatedFile("file ends inside the header", len(buf))
    magic, version, n, d = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {magic!r}", 0)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported version {version}", 4)

    body = 4 * n * d
    if len(buf) < _HEADER.size + body:
        raise TruncatedFile(
            f"header promises {n}x{d} float32 values ({body} bytes)", len(buf)
        )
    data = np.frombuffer(buf, dtype="<f4", count=n * d, offset=_HEADER.size)
    bad = np.flatnonzero(~np.isfinite(data))
    if bad.size:
        off = _HEADER.size + 4 * int(bad[0])
        raise NonFiniteValue("non-finite float32 value", off)
    data = data.reshape(n, d).copy()

    pos = _HEADER.size + body
    if len(buf) < pos + _U64.size:
        raise TruncatedFile("file ends before the id block length", len(buf))
    (id_len,) = _U64.unpack_from(buf, pos)
    pos += _U64.size
    if len(buf) < pos + id_len:
        raise TruncatedFile(f"id block promises {id_len} bytes", len(buf))
    if len(buf) > pos + id_len:
        raise FormatError("trailing bytes after the id block", pos + id_len)
    ids = tuple(buf[pos : pos + id_len].decode("utf-8").split("\n"))
    if len(ids) != n:
        raise FormatError(f"id block holds {len(ids)} ids for {n} rows", pos)
    return data, ids


def write_fmat(data: np.ndarray, ids, path) -> None:
    Path(path).write_bytes(fmat_bytes(data, ids))


def load_feature_matrix(path) -> FeatureMatrix:
    data, ids = read_fmat(path)
    return FeatureMatrix(data, ids)


def write_feature_matrix(matrix: FeatureMatrix, path) -> None:
    write_fmat(matrix.data, matrix.ids, path)


def load_embedding(path, seed: int = 0) -> ReducedEmbedding:
    data, ids = read_fmat(path)
    return ReducedEmbedding(data, ids, seed=seed)


def write_embedding(embedding: ReducedEmbedding, path) -> None:
    write_fmat(embedding.data, embedding.ids, path)


# -- JSON helpers --------------------------------------------------------


def dump_json(obj, path) -> None:
    """Canonical JSON writer: 2-space indent, trailing newline."""
    Path(path).write_text(json_text(obj), encoding="utf-8")


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- sample manifest ------------------------------------------------------


@dataclass(frozen=True)
class SampleRecord:
    id: str
    source_path: str
    thumbnail_path: str | None = None
    true_label: str | None = None


@dataclass(frozen=True)
class SampleManifest:
    """Per-sample metadata, ordered like the companion feature matrix."""

    records: tuple[SampleRecord, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        records = tuple(self.records)
        _check_ids([r.id for r in records], len(records))
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "_by_id", {r.id: r for r in records})

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    def record(self, sample_id: str) -> SampleRecord:
        return self._by_id[sample_id]

    def true_labels(self) -> dict[str, str]:
        return {r.id: r.true_label for r in self.records if r.true_label is not None}

    def check_matches(self, ids) -> None:
        if tuple(ids) != self.ids:
            raise ValueError("manifest ids do not match the feature matrix ids")


def load_sample_manifest(path) -> SampleManifest:
    rows = load_json(path)
    if not isinstance(rows, list):
        raise ValueError("sample manifest must be a JSON array")
    records = []
    for row in rows:
        records.append(
            SampleRecord(
                id=row["id"],
                source_path=row["source_path"],
                thumbnail_path=row.get("thumbnail_path"),
                true_label=row.get("true_label"),
            )
        )
    return SampleManifest(tuple(records))


def write_sample_manifest(manifest: SampleManifest, path) -> None:
    rows = []
    for r in manifest.records:
        row = {"id": r.id, "source_path": r.source_path}
        if r.thumbnail_path is not None:
            row["thumbnail_path"] = r.thumbnail_path
        if r.true_label is not None:
            row["true_label"] = r.true_label
        rows.append(row)
    dump_json(rows, path)


# -- label maps ------------------------------------------------------------


class LabelProvenance(str, Enum):
    HUMAN = "HUMAN"
    MAJORITY_ORACLE = "MAJORITY_ORACLE"


@dataclass(frozen=True)
class LabelMap:
    """cluster index -> human-readable label, with provenance."""

    entries: dict[int, str]
    provenance: LabelProvenance

    def __post_init__(self):
        entries = dict(self.entries)
        for idx, label in entries.items():
            if not isinstance(idx, int) or idx < 0:
                raise ValueError(f"bad cluster index {idx!r}")
            if not label or not isinstance(label, str):
                raise ValueError(f"bad label {label!r} for cluster {idx}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "provenance", LabelProvenance(self.provenance))

    def label_for(self, cluster_index: int) -> str:
        try:
            return self.entries[cluster_index]
        except KeyError:
            raise MissingLabel(cluster_index) from None


def label_map_to_dict(label_map: LabelMap) -> dict:
    entries = {str(k): label_map.entries[k] for k in sorted(label_map.entries)}
    return {"provenance": label_map.provenance.value, "entries": entries}


def write_label_map(label_map: LabelMap, path) -> None:
    dump_json(label_map_to_dict(label_map), path)


def load_label_map(path) -> LabelMap:
    obj = load_json(path)
    entries = {int(k): v for k, v in obj["entries"].items()}
    return LabelMap(entries, LabelProvenance(obj["provenance"]))


# -- labeled dataset export ------------------------------------------------


def labeled_dataset_dict(consensus, labels: LabelMap) -> dict:
    """Assemble the final export: labeled retained samples + rejected ids.

    `consensus` supplies ids, per-sample retained cluster (-1 = rejected),
    both in input order. Raises MissingLabel on the first retained cluster
    without a label entry.
    """
    labeled = []
    rejected = []
    for sample_id, cluster in zip(consensus.ids, consensus.assignment):
        if cluster < 0:
            rejected.append(sample_id)
        else:
            labeled.append({"id": sample_id, "label": labels.label_for(int(cluster))})
    return {"labeled": labeled, "rejected": rejected}


def write_labeled_dataset(manifest: SampleManifest, consensus, labels: LabelMap, path) -> int:
    """Write the labeled-dataset JSON; returns the number of labeled samples."""
    manifest.check_matches(consensus.ids)
    obj = labeled_dataset_dict(consensus, labels)
    dump_json(obj, path)
    return len(obj["labeled"])


def load_labeled_dataset(path) -> dict:
    return load_json(path)
