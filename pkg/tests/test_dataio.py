"""Binary matrix format, manifests, label maps, and the final export."""

import json
import struct

import numpy as np
import pytest

from cluster_annotate import dataio
from cluster_annotate.clustering import Method
from cluster_annotate.consensus import ConsensusResult
from cluster_annotate.dataio import (
    BadMagic,
    FeatureMatrix,
    FormatError,
    LabelMap,
    LabelProvenance,
    MissingLabel,
    NonFiniteValue,
    ReducedEmbedding,
    SampleManifest,
    SampleRecord,
    TruncatedFile,
    VersionMismatch,
)


def _consensus(ids, assignment, k=3):
    return ConsensusResult(
        ids=tuple(ids),
        assignment=np.array(assignment, dtype=np.int64),
        k=k,
        reference=Method.KMEANS,
        sources="0" * 64,
    )


class TestFmatRoundTrip:
    def test_bytes_recovered_exactly(self, tmp_path, tiny_matrix):
        path = tmp_path / "m.fmat"
        dataio.write_feature_matrix(tiny_matrix, path)
        first = path.read_bytes()
        loaded = dataio.load_feature_matrix(path)
        assert loaded.ids == tiny_matrix.ids
        np.testing.assert_array_equal(loaded.data, tiny_matrix.data)
        dataio.write_feature_matrix(loaded, path)
        assert path.read_bytes() == first

    def test_layout_is_what_the_header_promises(self, tmp_path, tiny_matrix):
        path = tmp_path / "m.fmat"
        dataio.write_feature_matrix(tiny_matrix, path)
        buf = path.read_bytes()
        magic, version, n, d = struct.unpack_from("<4sIQQ", buf, 0)
        assert magic == b"FMAT" and version == 1 and (n, d) == (3, 2)
        vals = np.frombuffer(buf, dtype="<f4", count=6, offset=24)
        np.testing.assert_array_equal(vals.reshape(3, 2), tiny_matrix.data)
        (id_len,) = struct.unpack_from("<Q", buf, 24 + 24)
        assert buf[32 + 24 :] == b"a\nb\nc"
        assert id_len == 5

    def test_wide_matrix_round_trip(self, tmp_path):
        rng = np.random.default_rng(7)
        data = rng.standard_normal((3, 2048)).astype(np.float32)
        m = FeatureMatrix(data, ("x", "y", "z"))
        path = tmp_path / "wide.fmat"
        dataio.write_feature_matrix(m, path)
        loaded = dataio.load_feature_matrix(path)
        np.testing.assert_array_equal(loaded.data, data)
        assert loaded.d == 2048

    def test_random_round_trips(self, tmp_path):
        rng = np.random.default_rng(0)
        for trial in range(20):
            n = int(rng.integers(2, 30))
            d = int(rng.integers(1, 40))
            data = rng.standard_normal((n, d)).astype(np.float32)
            ids = tuple(f"s{trial}-{i}" for i in range(n))
            path = tmp_path / f"r{trial}.fmat"
            dataio.write_fmat(data, ids, path)
            first = path.read_bytes()
            back, back_ids = dataio.read_fmat(path)
            np.testing.assert_array_equal(back, data)
            assert back_ids == ids
            dataio.write_fmat(back, back_ids, path)
            assert path.read_bytes() == first


class TestFmatErrors:
    def _write(self, tmp_path, tiny_matrix):
        path = tmp_path / "m.fmat"
        dataio.write_feature_matrix(tiny_matrix, path)
        return path

    def test_bad_magic_names_offset_zero(self, tmp_path, tiny_matrix):
        path = self._write(tmp_path, tiny_matrix)
        buf = bytearray(path.read_bytes())
        buf[:4] = b"XXXX"
        path.write_bytes(bytes(buf))
        with pytest.raises(BadMagic) as err:
            dataio.load_feature_matrix(path)
        assert err.value.offset == 0

    def test_version_mismatch_names_offset_four(self, tmp_path, tiny_matrix):
        path = self._write(tmp_path, tiny_matrix)
        buf = bytearray(path.read_bytes())
        struct.pack_into("<I", buf, 4, 9)
        path.write_bytes(bytes(buf))
        with pytest.raises(VersionMismatch) as err:
            dataio.load_feature_matrix(path)
        assert err.value.offset == 4

    @pytest.mark.parametrize("keep", [3, 10, 24, 30, 47, 52])
    def test_truncation_names_the_end(self, tmp_path, tiny_matrix, keep):
        path = self._write(tmp_path, tiny_matrix)
        whole = path.read_bytes()
        assert keep < len(whole)
        path.write_bytes(whole[:keep])
        with pytest.raises(TruncatedFile) as err:
            dataio.load_feature_matrix(path)
        assert err.value.offset == keep

    def test_non_finite_names_the_value_offset(self, tmp_path, tiny_matrix):
        path = self._write(tmp_path, tiny_matrix)
        buf = bytearray(path.read_bytes())
        # poison row 1 col 1 -> flat index 3
        struct.pack_into("<f", buf, 24 + 4 * 3, float("nan"))
        path.write_bytes(bytes(buf))
        with pytest.raises(NonFiniteValue) as err:
            dataio.load_feature_matrix(path)
        assert err.value.offset == 24 + 12

    def test_trailing_garbage_rejected(self, tmp_path, tiny_matrix):
        path = self._write(tmp_path, tiny_matrix)
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(FormatError):
            dataio.load_feature_matrix(path)


class TestMatrixInvariants:
    def test_rejects_single_row(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.zeros((1, 3), dtype=np.float32), ("a",))

    def test_rejects_nan(self):
        data = np.array([[0.0, np.nan], [1.0, 2.0]], dtype=np.float32)
        with pytest.raises(ValueError):
            FeatureMatrix(data, ("a", "b"))

    def test_rejects_duplicate_ids(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.zeros((2, 2), dtype=np.float32), ("a", "a"))

    def test_rejects_empty_id(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.zeros((2, 2), dtype=np.float32), ("a", ""))

    def test_data_is_immutable(self, tiny_matrix):
        with pytest.raises(ValueError):
            tiny_matrix.data[0, 0] = 9.0

    def test_embedding_allows_single_row_matrixes_not(self):
        # embeddings mirror their source matrix, so the same n >= 2 holds
        emb = ReducedEmbedding(np.zeros((2, 1), dtype=np.float32), ("a", "b"))
        assert emb.n == 2 and emb.d == 1


class TestManifest:
    def test_round_trip_bytes(self, tmp_path, tiny_manifest):
        path = tmp_path / "manifest.json"
        dataio.write_sample_manifest(tiny_manifest, path)
        first = path.read_bytes()
        loaded = dataio.load_sample_manifest(path)
        assert loaded == tiny_manifest
        dataio.write_sample_manifest(loaded, path)
        assert path.read_bytes() == first

    def test_optional_fields_survive(self, tmp_path):
        manifest = SampleManifest(
            (
                SampleRecord("a", "x.png", thumbnail_path="t/a.png"),
                SampleRecord("b", "y.png", true_label="dog"),
            )
        )
        path = tmp_path / "m.json"
        dataio.write_sample_manifest(manifest, path)
        loaded = dataio.load_sample_manifest(path)
        assert loaded.record("a").thumbnail_path == "t/a.png"
        assert loaded.record("a").true_label is None
        assert loaded.record("b").true_label == "dog"

    def test_id_mismatch_detected(self, tiny_manifest):
        with pytest.raises(ValueError):
            tiny_manifest.check_matches(("a", "c", "b"))


class TestLabelMap:
    def test_round_trip_bytes(self, tmp_path):
        lm = LabelMap({2: "spore", 0: "hypha"}, LabelProvenance.HUMAN)
        path = tmp_path / "labels.json"
        dataio.write_label_map(lm, path)
        first = path.read_bytes()
        loaded = dataio.load_label_map(path)
        assert loaded.entries == {0: "hypha", 2: "spore"}
        assert loaded.provenance is LabelProvenance.HUMAN
        dataio.write_label_map(loaded, path)
        assert path.read_bytes() == first

    def test_entries_serialized_in_numeric_order(self, tmp_path):
        lm = LabelMap({10: "j", 2: "b"}, LabelProvenance.MAJORITY_ORACLE)
        path = tmp_path / "labels.json"
        dataio.write_label_map(lm, path)
        obj = json.loads(path.read_text())
        assert list(obj["entries"]) == ["2", "10"]

    def test_rejects_empty_label(self):
        with pytest.raises(ValueError):
            LabelMap({0: ""}, LabelProvenance.HUMAN)

    def test_missing_label_error_names_cluster(self):
        lm = LabelMap({0: "x"}, LabelProvenance.HUMAN)
        with pytest.raises(MissingLabel) as err:
            lm.label_for(3)
        assert err.value.cluster_index == 3


class TestLabeledDataset:
    def test_export_counts_and_partitions(self, tmp_path, tiny_manifest):
        consensus = _consensus(("a", "b", "c"), [0, -1, 2])
        labels = LabelMap({0: "cat", 2: "dog"}, LabelProvenance.HUMAN)
        path = tmp_path / "out.json"
        count = dataio.write_labeled_dataset(tiny_manifest, consensus, labels, path)
        assert count == 2
        obj = dataio.load_labeled_dataset(path)
        assert obj["labeled"] == [
            {"id": "a", "label": "cat"},
            {"id": "c", "label": "dog"},
        ]
        assert obj["rejected"] == ["b"]

    def test_every_sample_appears_exactly_once(self, tmp_path, tiny_manifest):
        consensus = _consensus(("a", "b", "c"), [1, 1, -1])
        labels = LabelMap({1: "cat"}, LabelProvenance.HUMAN)
        path = tmp_path / "out.json"
        dataio.write_labeled_dataset(tiny_manifest, consensus, labels, path)
        obj = dataio.load_labeled_dataset(path)
        seen = [row["id"] for row in obj["labeled"]] + obj["rejected"]
        assert sorted(seen) == ["a", "b", "c"]

    def test_missing_label_raises_with_cluster(self, tmp_path, tiny_manifest):
        consensus = _consensus(("a", "b", "c"), [0, 2, -1])
        labels = LabelMap({0: "cat"}, LabelProvenance.HUMAN)
        with pytest.raises(MissingLabel) as err:
            dataio.write_labeled_dataset(tiny_manifest, consensus, labels, tmp_path / "o.json")
        assert err.value.cluster_index == 2

    def test_rerun_is_byte_identical(self, tmp_path, tiny_manifest):
        consensus = _consensus(("a", "b", "c"), [0, 0, 1], k=2)
        labels = LabelMap({0: "cat", 1: "dog"}, LabelProvenance.HUMAN)
        p1 = tmp_path / "one.json"
        p2 = tmp_path / "two.json"
        dataio.write_labeled_dataset(tiny_manifest, consensus, labels, p1)
        dataio.write_labeled_dataset(tiny_manifest, consensus, labels, p2)
        assert p1.read_bytes() == p2.read_bytes()
