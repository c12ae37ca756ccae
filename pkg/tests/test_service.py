"""Endpoint contract for the annotation HTTP service."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from cluster_annotate.clustering import Method
from cluster_annotate.consensus import ConsensusResult
from cluster_annotate.dataio import ReducedEmbedding, SampleManifest, SampleRecord, load_json
from cluster_annotate.service import AnnotateSession, create_app


@pytest.fixture
def session(tmp_path):
    ids = ("a", "b", "c", "d", "e", "f")
    points = np.array(
        [[0, 0], [1, 0], [10, 0], [10, 1], [20, 0], [5, 5]], dtype=np.float32
    )
    cons = ConsensusResult(
        ids=ids,
        assignment=np.array([0, 0, 1, 1, 2, -1], dtype=np.int64),
        k=3,
        reference=Method.KMEANS,
        sources="0" * 64,
    )
    emb = ReducedEmbedding(data=points, ids=ids, seed=0)
    thumb = tmp_path / "a.png"
    thumb.write_bytes(b"\x89PNG\r\n\x1a\nfake")
    records = [SampleRecord("a", "img/a.png", thumbnail_path=str(thumb))]
    records += [SampleRecord(i, f"img/{i}.png") for i in ids[1:]]
    manifest = SampleManifest(tuple(records))
    return AnnotateSession(
        consensus=cons,
        embedding=emb,
        manifest=manifest,
        output_path=tmp_path / "labeled.json",
        labels_path=tmp_path / "labels.json",
    )


@pytest.fixture
def client(session):
    return TestClient(create_app(session))


class TestStatus:
    def test_counts(self, client):
        body = client.get("/api/status").json()
        assert body == {
            "n": 6,
            "retained": 5,
            "rejected": 1,
            "clusters": 3,
            "labeled_clusters": 0,
            "revision": 0,
        }

    def test_tracks_labeling_progress(self, client):
        client.put("/api/clusters/0/label", json={"label": "rust"})
        body = client.get("/api/status").json()
        assert body["labeled_clusters"] == 1
        assert body["revision"] == 1


class TestClusters:
    def test_listing_shape(self, client):
        rows = client.get("/api/clusters").json()
        assert [r["cluster_index"] for r in rows] == [0, 1, 2]
        assert [r["size"] for r in rows] == [2, 2, 1]
        assert all(r["label"] is None for r in rows)
        ex = rows[0]["exemplars"][0]
        assert ex["thumbnail_url"] == f"/api/samples/{ex['id']}/thumbnail"

    def test_detail_has_members(self, client):
        body = client.get("/api/clusters/1").json()
        assert body["member_ids"] == ["c", "d"]
        assert body["label"] is None

    def test_unknown_cluster_404(self, client):
        assert client.get("/api/clusters/99").status_code == 404

    def test_label_visible_in_listing_and_detail(self, client):
        client.put("/api/clusters/1/label", json={"label": "smut"})
        rows = client.get("/api/clusters").json()
        assert rows[1]["label"] == "smut"
        assert client.get("/api/clusters/1").json()["label"] == "smut"


class TestLabelEdits:
    def test_put_bumps_revision(self, client):
        r1 = client.put("/api/clusters/0/label", json={"label": "rust"})
        r2 = client.put("/api/clusters/0/label", json={"label": "mold"})
        assert r1.json() == {"revision": 1}
        assert r2.json() == {"revision": 2}

    def test_delete_bumps_revision(self, client):
        client.put("/api/clusters/0/label", json={"label": "rust"})
        r = client.delete("/api/clusters/0/label")
        assert r.json() == {"revision": 2}
        assert client.get("/api/clusters/0").json()["label"] is None

    def test_unknown_cluster_404(self, client):
        assert client.put("/api/clusters/99/label", json={"label": "x"}).status_code == 404
        assert client.delete("/api/clusters/99/label").status_code == 404

    def test_blank_label_422(self, client):
        assert client.put("/api/clusters/0/label", json={"label": "  "}).status_code == 422
        assert client.put("/api/clusters/0/label", json={}).status_code == 422

    def test_labels_persisted_on_each_edit(self, client, session):
        client.put("/api/clusters/0/label", json={"label": "rust"})
        stored = load_json(session.labels_path)
        assert stored["entries"] == {"0": "rust"}
        client.delete("/api/clusters/0/label")
        assert load_json(session.labels_path)["entries"] == {}


class TestThumbnails:
    def test_served_with_media_type(self, client):
        r = client.get("/api/samples/a/thumbnail")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content.startswith(b"\x89PNG")

    def test_unknown_sample_404(self, client):
        assert client.get("/api/samples/nope/thumbnail").status_code == 404

    def test_sample_without_thumbnail_404(self, client):
        assert client.get("/api/samples/b/thumbnail").status_code == 404


class TestFinalize:
    def test_premature_finalize_409_names_the_gaps(self, client):
        client.put("/api/clusters/0/label", json={"label": "rust"})
        r = client.post("/api/finalize")
        assert r.status_code == 409
        assert r.json() == {"unlabeled": [1, 2]}

    def test_full_walkthrough(self, client, session):
        for row in client.get("/api/clusters").json():
            idx = row["cluster_index"]
            r = client.put(f"/api/clusters/{idx}/label", json={"label": f"name{idx % 2}"})
            assert r.status_code == 200
        r = client.post("/api/finalize")
        assert r.status_code == 200
        body = r.json()
        assert body["labeled_count"] == 5  # every retained sample
        assert body["output_path"] == str(session.output_path)
        stored = json.loads(session.output_path.read_text())
        assert len(stored["labeled"]) == 5
        assert stored["rejected"] == ["f"]

    def test_ui_dir_served_when_present(self, session, tmp_path):
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<!doctype html><title>x</title>hello")
        session.ui_dir = ui
        client = TestClient(create_app(session))
        r = client.get("/")
        assert r.status_code == 200
        assert "hello" in r.text
        # API still reachable under the mount
        assert client.get("/api/status").status_code == 200
