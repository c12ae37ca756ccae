"""End-to-end driver: load, reduce, cluster, vote, report.

Each stage logs what it produced and writes its artifact into the run
directory, so any stage's output can be inspected or re-fed to the CLI's
per-stage subcommands. Failures surface as StageError naming the stage.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import annotate, pca
from .clustering import Clustering, run_method, write_clustering
from .config import RunConfig, config_to_dict
from .consensus import ConsensusResult, vote, write_consensus
from .dataio import (
    FeatureMatrix,
    ReducedEmbedding,
    SampleManifest,
    dump_json,
    load_feature_matrix,
    load_sample_manifest,
    write_embedding,
    write_label_map,
)
from .evaluation import evaluate, majority_label_map
from .umap import UmapParams, umap_reduce

log = logging.getLogger("cluster_annotate")


class StageError(RuntimeError):
    """Wraps any stage failure with the stage's name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunResult:
    out_dir: Path
    consensus: ConsensusResult
    metrics: dict
    artifacts: dict[str, str]


def _stage(name: str):
    def wrap(fn):
        def inner(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                result = fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as err:
                raise StageError(name, err) from err
            log.info("stage %s done in %.2fs", name, time.perf_counter() - t0)
            return result

        return inner

    return wrap


@_stage("load")
def load_inputs(cfg: RunConfig) -> tuple[FeatureMatrix, SampleManifest | None]:
    if cfg.features is None:
        raise ValueError("no feature matrix configured")
    matrix = load_feature_matrix(cfg.features)
    manifest = None
    if cfg.manifest is not None:
        manifest = load_sample_manifest(cfg.manifest)
        manifest.check_matches(matrix.ids)
    log.info("loaded %d samples x %d features", matrix.n, matrix.d)
    return matrix, manifest


@_stage("pca")
def reduce_linear(matrix: FeatureMatrix, cfg: RunConfig, out_dir: Path) -> FeatureMatrix:
    limit = min(matrix.n - 1, matrix.d)
    model = pca.pca_fit(matrix, max_dims=limit)
    max_dims = cfg.pca.max_dims if cfg.pca.max_dims is not None else limit - 1
    max_dims = min(max_dims, limit - 1)
    m = pca.elbow_select(model.eigenvalues, cfg.pca.min_dims, max_dims)
    reduced = pca.pca_transform(model, matrix, m)
    pca.save_pca_model(model, out_dir / "pca_model")
    log.info("pca kept %d of %d dims", m, matrix.d)
    return FeatureMatrix(reduced.data, reduced.ids)


@_stage("umap")
def reduce_nonlinear(matrix: FeatureMatrix, cfg: RunConfig, out_dir: Path, seed: int) -> ReducedEmbedding:
    n_neighbors = min(cfg.umap.n_neighbors, matrix.n - 1)
    if n_neighbors != cfg.umap.n_neighbors:
        log.info("n_neighbors lowered to %d for n=%d", n_neighbors, matrix.n)
    params = UmapParams(
        n_neighbors=n_neighbors,
        out_dims=cfg.umap.out_dims,
        epochs=cfg.umap.epochs,
        min_dist=cfg.umap.min_dist,
        spread=cfg.umap.spread,
        negative_sample_rate=cfg.umap.negative_sample_rate,
    )
    embedding = umap_reduce(matrix, params, seed=seed)
    write_embedding(embedding, out_dir / "embedding.fmat")
    log.info("embedded to %d dims", embedding.d)
    return embedding


@_stage("cluster")
def run_clusterers(embedding: ReducedEmbedding, cfg: RunConfig, seed: int) -> list[Clustering]:
    out = []
    for method in cfg.cluster.methods:
        c = run_method(
            method,
            embedding,
            cfg.cluster.k_over,
            seed=seed,
            n_init=cfg.cluster.n_init,
            max_iter=cfg.cluster.max_iter,
            birch_threshold=cfg.cluster.birch_threshold,
            branching_factor=cfg.cluster.branching_factor,
            linkage=cfg.cluster.linkage,
        )
        log.info("%s done (k=%d)", method.value, c.k)
        out.append(c)
    return out


@_stage("vote")
def run_vote(clusterings: list[Clustering], embedding: ReducedEmbedding, cfg: RunConfig) -> ConsensusResult:
    methods = [c.method for c in clusterings]
    ref_index = methods.index(cfg.vote.reference)
    result = vote(clusterings, embedding.ids, ref_index, cfg.vote.alignment)
    log.info(
        "vote kept %d/%d samples (reject %.1f%%)",
        result.retained_count,
        result.n,
        100.0 * result.reject_rate,
    )
    return result


def run_pipeline(cfg: RunConfig, seed: int | None = None) -> RunResult:
    """One full run at one seed. Artifacts land in cfg.out_dir."""
    seed = cfg.seed if seed is None else seed
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_json(config_to_dict(cfg), out_dir / "config.json")

    matrix, manifest = load_inputs(cfg)
    if cfg.pca.enabled:
        matrix = reduce_linear(matrix, cfg, out_dir)
    embedding = reduce_nonlinear(matrix, cfg, out_dir, seed)
    clusterings = run_clusterers(embedding, cfg, seed)
    for c in clusterings:
        write_clustering(c, out_dir / f"clustering_{c.method.value.lower()}.json")
    consensus = run_vote(clusterings, embedding, cfg)
    write_consensus(consensus, out_dir / "consensus.json")

    cards = annotate.build_manifests(consensus, embedding)
    dump_json([c.to_dict() for c in cards], out_dir / "cluster_manifests.json")

    metrics = {
        "n": consensus.n,
        "retained": consensus.retained_count,
        "reject_rate": 100.0 * consensus.reject_rate,
        "clusters": len(cards),
        "seed": seed,
    }
    artifacts = {
        "config": str(out_dir / "config.json"),
        "embedding": str(out_dir / "embedding.fmat"),
        "consensus": str(out_dir / "consensus.json"),
        "cluster_manifests": str(out_dir / "cluster_manifests.json"),
    }

    if manifest is not None and manifest.true_labels():
        labels = majority_label_map(consensus, manifest)
        write_label_map(labels, out_dir / "labels.json")
        report = evaluate(consensus, labels, manifest)
        (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
        dump_json(report.to_json_dict(), out_dir / "report.json")
        (out_dir / "confusion.csv").write_text(report.confusion_csv(), encoding="utf-8")
        metrics["accuracy"] = report.overall_accuracy
        artifacts["report"] = str(out_dir / "report.json")
        log.info(
            "oracle accuracy %.1f%% over %d retained",
            report.overall_accuracy,
            report.retained_count,
        )

    return RunResult(out_dir=out_dir, consensus=consensus, metrics=metrics, artifacts=artifacts)


def run_trials(cfg: RunConfig) -> list[RunResult]:
    """cfg.trials runs at seeds seed, seed+1, ... in per-trial
    subdirectories. Only the seed varies."""
    results = []
    base = Path(cfg.out_dir)
    for t in range(cfg.trials):
        sub = base if cfg.trials == 1 else base / f"trial_{t:02d}"
        trial_cfg = cfg_with(cfg, out_dir=str(sub))
        results.append(run_pipeline(trial_cfg, seed=cfg.seed + t))
    return results


def cfg_with(cfg: RunConfig, **kwargs) -> RunConfig:
    from dataclasses import replace

    return replace(cfg, **kwargs)


def summarize_trials(results: list[RunResult]) -> dict:
    """Mean and spread of the headline numbers across trials."""
    out = {"trials": len(results)}
    for key in ("accuracy", "reject_rate"):
        vals = [r.metrics[key] for r in results if key in r.metrics]
        if vals:
            arr = np.array(vals)
            out[key] = {"mean": float(arr.mean()), "std": float(arr.std())}
    return out
