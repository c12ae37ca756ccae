"""Command line entry points.

One subcommand per pipeline stage plus `run` for the whole thing. Flags
override the config file, which overrides defaults. Log level comes from
the CA_LOG environment variable (error, warn, info, debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import annotate as annotate_mod
from . import pca as pca_mod
from .clustering import Method, load_clustering, run_method, write_clustering
from .config import RunConfig, apply_flag_overrides, load_config
from .consensus import Alignment, load_consensus, vote, write_consensus
from .dataio import (
    FeatureMatrix,
    dump_json,
    load_embedding,
    load_feature_matrix,
    load_label_map,
    load_sample_manifest,
    write_embedding,
    write_feature_matrix,
    write_sample_manifest,
)
from .evaluation import BlobSpec, compare_single_vs_vote, evaluate, majority_label_map, make_blobs
from .pipeline import StageError, run_trials, summarize_trials
from .umap import UmapParams, umap_reduce

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    level = os.environ.get("CA_LOG", "warn").lower()
    if level not in LOG_LEVELS:
        print(f"warning: unknown CA_LOG level {level!r}, using warn", file=sys.stderr)
        level = "warn"
    logging.basicConfig(
        level=LOG_LEVELS[level],
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--seed", type=int, help="RNG seed (u64)")
    p.add_argument("--trials", type=int, help="repeat with seeds seed..seed+N-1")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--k-over", type=int, dest="k_over", help="over-clustering count")
    p.add_argument("--dims", type=int, help="embedding output dimensions")
    p.add_argument("--no-pca", action="store_true", dest="no_pca", help="skip the linear reduction")
    p.add_argument(
        "--reference",
        choices=[m.value.lower() for m in Method],
        help="reference clusterer for alignment",
    )
    p.add_argument(
        "--alignment",
        choices=[a.value.lower() for a in Alignment],
        help="cluster alignment strategy",
    )


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "features", None) is not None:
        args.features = str(args.features)
    if getattr(args, "manifest", None) is not None:
        args.manifest = str(args.manifest)
    if getattr(args, "out", None) is not None:
        args.out = str(args.out)
    return apply_flag_overrides(cfg, args)


def _out_dir(args, default: str = "runs/latest") -> Path:
    out = Path(getattr(args, "out", None) or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_blobs(args) -> int:
    spec = BlobSpec(
        classes=args.classes,
        per_class=args.per_class,
        dim=args.blob_dim,
        sigma=args.sigma,
        noise_fraction=args.noise,
        seed=args.seed or 0,
    )
    matrix, manifest = make_blobs(spec)
    out = _out_dir(args)
    write_feature_matrix(matrix, out / "features.fmat")
    write_sample_manifest(manifest, out / "manifest.json")
    print(f"wrote {matrix.n} samples x {matrix.d} dims to {out}")
    return 0


def cmd_reduce(args) -> int:
    cfg = _resolve_config(args)
    matrix = load_feature_matrix(args.features)
    out = _out_dir(args)
    seed = cfg.seed
    if cfg.pca.enabled and not args.no_pca:
        limit = min(matrix.n - 1, matrix.d)
        model = pca_mod.pca_fit(matrix, max_dims=limit)
        max_dims = cfg.pca.max_dims if cfg.pca.max_dims is not None else limit - 1
        m = pca_mod.elbow_select(model.eigenvalues, cfg.pca.min_dims, min(max_dims, limit - 1))
        reduced = pca_mod.pca_transform(model, matrix, m)
        pca_mod.save_pca_model(model, out / "pca_model")
        matrix = FeatureMatrix(reduced.data, reduced.ids)
        print(f"pca: kept {m} dims")
    params = UmapParams(
        n_neighbors=min(cfg.umap.n_neighbors, matrix.n - 1),
        out_dims=cfg.umap.out_dims,
        epochs=cfg.umap.epochs,
        min_dist=cfg.umap.min_dist,
        spread=cfg.umap.spread,
        negative_sample_rate=cfg.umap.negative_sample_rate,
    )
    embedding = umap_reduce(matrix, params, seed=seed)
    write_embedding(embedding, out / "embedding.fmat")
    print(f"wrote embedding {embedding.n} x {embedding.d} to {out / 'embedding.fmat'}")
    return 0


def cmd_cluster(args) -> int:
    cfg = _resolve_config(args)
    embedding = load_embedding(args.embedding)
    out = _out_dir(args)
    method = Method(args.method.upper())
    c = run_method(
        method,
        embedding,
        cfg.cluster.k_over,
        seed=cfg.seed,
        n_init=cfg.cluster.n_init,
        max_iter=cfg.cluster.max_iter,
        birch_threshold=cfg.cluster.birch_threshold,
        branching_factor=cfg.cluster.branching_factor,
        linkage=cfg.cluster.linkage,
    )
    path = out / f"clustering_{method.value.lower()}.json"
    write_clustering(c, path)
    extra = f", inertia {c.inertia:.3f}" if c.inertia is not None else ""
    print(f"wrote {path} (k={c.k}{extra})")
    return 0


def cmd_vote(args) -> int:
    cfg = _resolve_config(args)
    embedding = load_embedding(args.embedding)
    clusterings = [load_clustering(p) for p in args.clusterings]
    methods = [c.method for c in clusterings]
    ref_index = methods.index(cfg.vote.reference) if cfg.vote.reference in methods else 0
    result = vote(clusterings, embedding.ids, ref_index, cfg.vote.alignment)
    out = _out_dir(args)
    write_consensus(result, out / "consensus.json")
    print(
        f"retained {result.retained_count}/{result.n} "
        f"(reject {100 * result.reject_rate:.1f}%), wrote {out / 'consensus.json'}"
    )
    return 0


def cmd_evaluate(args) -> int:
    consensus = load_consensus(args.consensus)
    manifest = load_sample_manifest(args.manifest)
    labels = (
        load_label_map(args.labels)
        if args.labels
        else majority_label_map(consensus, manifest)
    )
    report = evaluate(consensus, labels, manifest)
    out = _out_dir(args)
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    dump_json(report.to_json_dict(), out / "report.json")
    (out / "confusion.csv").write_text(report.confusion_csv(), encoding="utf-8")
    print(report.to_text())
    return 0


def cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    embedding = load_embedding(args.embedding)
    manifest = load_sample_manifest(args.manifest)
    rows = compare_single_vs_vote(
        embedding,
        manifest,
        cfg.cluster.k_over,
        methods=cfg.cluster.methods,
        seed=cfg.seed,
        reference=cfg.vote.reference,
        alignment=cfg.vote.alignment,
        n_init=cfg.cluster.n_init,
    )
    width = max(len(r["name"]) for r in rows) + 2
    print(f"{'method'.ljust(width)}{'accuracy':>10}{'reject':>10}")
    for r in rows:
        print(f"{r['name'].ljust(width)}{r['accuracy']:>9.1f}%{r['reject_rate']:>9.1f}%")
    out = _out_dir(args)
    dump_json(rows, out / "comparison.json")
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    embedding = load_embedding(args.embedding)
    manifest = load_sample_manifest(args.manifest) if args.manifest else None
    counts = [int(v) for v in args.counts.split(",")]
    rows = annotate_mod.sweep_clusters(
        embedding,
        counts,
        methods=cfg.cluster.methods,
        seed=cfg.seed,
        reference=cfg.vote.reference,
        alignment=cfg.vote.alignment,
        truth=manifest,
    )
    out = _out_dir(args)
    serializable = []
    for row in rows:
        item = {k: v for k, v in row.items() if k != "manifests"}
        item["manifests"] = [c.to_dict() for c in row["manifests"]]
        serializable.append(item)
    dump_json(serializable, out / "sweep.json")
    for row in rows:
        acc = f"  accuracy {row['accuracy']:.1f}%" if "accuracy" in row else ""
        print(
            f"k_over={row['k_over']:>4}  clusters={row['clusters']:>4}  "
            f"reject {row['reject_rate']:.1f}%{acc}"
        )
    return 0


def cmd_annotate(args) -> int:
    consensus = load_consensus(args.consensus)
    embedding = load_embedding(args.embedding)
    cards = annotate_mod.build_manifests(consensus, embedding)
    out = _out_dir(args)
    dump_json([c.to_dict() for c in cards], out / "cluster_manifests.json")
    print(f"wrote {len(cards)} cluster manifests to {out / 'cluster_manifests.json'}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import AnnotateSession, create_app

    consensus = load_consensus(args.consensus)
    embedding = load_embedding(args.embedding)
    manifest = load_sample_manifest(args.manifest)
    out = _out_dir(args)
    ui_dir = Path(args.ui) if args.ui else None
    session = AnnotateSession(
        consensus=consensus,
        embedding=embedding,
        manifest=manifest,
        output_path=out / "labeled_dataset.json",
        labels_path=out / "labels.json",
        ui_dir=ui_dir,
    )
    app = create_app(session)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_finalize(args) -> int:
    consensus = load_consensus(args.consensus)
    manifest = load_sample_manifest(args.manifest)
    labels = load_label_map(args.labels)
    out = _out_dir(args)
    path = out / "labeled_dataset.json"
    try:
        count = annotate_mod.finalize(consensus, manifest, labels, path)
    except annotate_mod.UnlabeledClusters as err:
        print(f"error: unlabeled clusters {err.clusters}", file=sys.stderr)
        return 1
    print(f"wrote {count} labeled samples to {path}")
    return 0


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    results = run_trials(cfg)
    for r in results:
        acc = f"  accuracy {r.metrics['accuracy']:.1f}%" if "accuracy" in r.metrics else ""
        print(
            f"seed={r.metrics['seed']}  retained {r.metrics['retained']}/{r.metrics['n']}"
            f"  reject {r.metrics['reject_rate']:.1f}%{acc}"
        )
    if len(results) > 1:
        summary = summarize_trials(results)
        parts = []
        for key in ("accuracy", "reject_rate"):
            if key in summary:
                parts.append(
                    f"{key} {summary[key]['mean']:.1f} +/- {summary[key]['std']:.1f}"
                )
        print(f"over {summary['trials']} trials: " + ", ".join(parts))
        dump_json(summary, Path(cfg.out_dir) / "trials_summary.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cluster-annotate",
        description="Unsupervised clustering with ensemble voting and post-hoc labeling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blobs", help="generate a synthetic benchmark")
    _add_common(p)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--per-class", type=int, default=250, dest="per_class")
    p.add_argument("--blob-dim", type=int, default=64, dest="blob_dim")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.set_defaults(fn=cmd_blobs)

    p = sub.add_parser("reduce", help="feature matrix -> embedding")
    _add_common(p)
    p.add_argument("--features", type=Path, required=True)
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("cluster", help="run one clustering method")
    _add_common(p)
    p.add_argument("--embedding", type=Path, required=True)
    p.add_argument("--method", required=True, choices=[m.value.lower() for m in Method])
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("vote", help="combine clusterings by unanimity")
    _add_common(p)
    p.add_argument("--embedding", type=Path, required=True)
    p.add_argument("--clusterings", type=Path, nargs="+", required=True)
    p.set_defaults(fn=cmd_vote)

    p = sub.add_parser("evaluate", help="score a consensus against truth")
    _add_common(p)
    p.add_argument("--consensus", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--labels", type=Path, help="label map (default: majority oracle)")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("compare", help="single methods vs the vote")
    _add_common(p)
    p.add_argument("--embedding", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("sweep", help="vote at several cluster counts")
    _add_common(p)
    p.add_argument("--embedding", type=Path, required=True)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--counts", required=True, help="comma-separated cluster counts")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("annotate", help="write per-cluster review cards")
    _add_common(p)
    p.add_argument("--consensus", type=Path, required=True)
    p.add_argument("--embedding", type=Path, required=True)
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("serve", help="run the labeling web service")
    _add_common(p)
    p.add_argument("--consensus", type=Path, required=True)
    p.add_argument("--embedding", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--ui", type=Path, help="static UI directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("finalize", help="export the labeled dataset")
    _add_common(p)
    p.add_argument("--consensus", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.set_defaults(fn=cmd_finalize)

    p = sub.add_parser("run", help="full pipeline: load, reduce, cluster, vote")
    _add_common(p)
    p.add_argument("--features", type=Path)
    p.add_argument("--manifest", type=Path)
    p.set_defaults(fn=cmd_run)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
