"""HTTP facade over one annotation session.

Serves cluster cards to a browser UI, accepts label edits, and exports
the labeled dataset. All mutation goes through one lock; inputs are never
modified, only the label map and the final export are written.
"""

from __future__ import annotations

import mimetypes
import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotate import (
    ClusterManifest,
    LabelStore,
    UnlabeledClusters,
    build_manifests,
    finalize,
    with_labels,
)
from .consensus import ConsensusResult
from .dataio import ReducedEmbedding, SampleManifest, write_label_map


@dataclass
class AnnotateSession:
    """Everything one labeling session needs, loaded once at startup."""

    consensus: ConsensusResult
    embedding: ReducedEmbedding
    manifest: SampleManifest
    output_path: Path
    labels_path: Path | None = None  # label map persisted on every edit
    ui_dir: Path | None = None


class LabelBody(BaseModel):
    label: str


def create_app(session: AnnotateSession) -> FastAPI:
    app = FastAPI(title="cluster-annotate")
    lock = threading.Lock()
    store = LabelStore()
    cards: list[ClusterManifest] = build_manifests(session.consensus, session.embedding)
    by_index = {c.cluster_index: c for c in cards}

    def persist_labels() -> None:
        if session.labels_path is not None:
            write_label_map(store.to_label_map(), session.labels_path)

    @app.get("/api/status")
    def status():
        with lock:
            labels = store.labels()
            return {
                "n": session.consensus.n,
                "retained": session.consensus.retained_count,
                "rejected": session.consensus.rejected_count,
                "clusters": len(cards),
                "labeled_clusters": sum(1 for c in cards if c.cluster_index in labels),
                "revision": store.revision,
            }

    @app.get("/api/clusters")
    def clusters():
        with lock:
            labeled = with_labels(cards, store.labels())
        return [
            {
                "cluster_index": c.cluster_index,
                "size": c.size,
                "label": c.label,
                "exemplars": [
                    {"id": sid, "thumbnail_url": f"/api/samples/{sid}/thumbnail"}
                    for sid in c.exemplar_ids
                ],
            }
            for c in labeled
        ]

    @app.get("/api/clusters/{index}")
    def cluster_detail(index: int):
        card = by_index.get(index)
        if card is None:
            raise HTTPException(404, f"no cluster {index}")
        with lock:
            label = store.get(index)
        return {
            "cluster_index": card.cluster_index,
            "size": card.size,
            "label": label,
            "member_ids": list(card.member_ids),
            "exemplars": [
                {"id": sid, "thumbnail_url": f"/api/samples/{sid}/thumbnail"}
                for sid in card.exemplar_ids
            ],
        }

    @app.get("/api/samples/{sample_id:path}/thumbnail")
    def thumbnail(sample_id: str):
        try:
            record = session.manifest.record(sample_id)
        except KeyError:
            raise HTTPException(404, f"unknown sample {sample_id}") from None
        if record.thumbnail_path is None:
            raise HTTPException(404, f"sample {sample_id} has no thumbnail")
        path = Path(record.thumbnail_path)
        if not path.is_file():
            raise HTTPException(404, f"thumbnail file missing for {sample_id}")
        media_type = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        return FileResponse(path, media_type=media_type)

    @app.put("/api/clusters/{index}/label")
    def put_label(index: int, body: LabelBody):
        if index not in by_index:
            raise HTTPException(404, f"no cluster {index}")
        if not body.label.strip():
            raise HTTPException(422, "label must be a non-empty string")
        with lock:
            revision = store.set_label(index, body.label)
            persist_labels()
        return {"revision": revision}

    @app.delete("/api/clusters/{index}/label")
    def delete_label(index: int):
        if index not in by_index:
            raise HTTPException(404, f"no cluster {index}")
        with lock:
            revision = store.delete_label(index)
            persist_labels()
        return {"revision": revision}

    @app.post("/api/finalize")
    def run_finalize():
        with lock:
            try:
                count = finalize(
                    session.consensus,
                    session.manifest,
                    store.to_label_map(),
                    session.output_path,
                )
            except UnlabeledClusters as err:
                return JSONResponse(
                    status_code=409, content={"unlabeled": err.clusters}
                )
        return {"labeled_count": count, "output_path": str(session.output_path)}

    if session.ui_dir is not None and Path(session.ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=session.ui_dir, html=True), name="ui")

    return app
