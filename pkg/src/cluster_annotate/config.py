"""Run configuration: JSON file, overridden by CLI flags.

Precedence is flags > config file > defaults. The whole resolved
configuration is written next to the run's artifacts so a run can be
reproduced from its output directory alone.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .clustering import Linkage, Method
from .consensus import Alignment


@dataclass(frozen=True)
class PcaSettings:
    enabled: bool = False
    min_dims: int = 8
    max_dims: int | None = None  # None: widest legal range

    def __post_init__(self):
        if self.min_dims < 1:
            raise ValueError("pca.min_dims must be >= 1")
        if self.max_dims is not None and self.max_dims < self.min_dims:
            raise ValueError("pca.max_dims must be >= pca.min_dims")


@dataclass(frozen=True)
class UmapSettings:
    n_neighbors: int = 15
    out_dims: int = 200
    epochs: int = 200
    min_dist: float = 0.1
    spread: float = 1.0
    negative_sample_rate: int = 5


@dataclass(frozen=True)
class ClusterSettings:
    k_over: int = 20
    methods: tuple[Method, ...] = (Method.KMEANS, Method.AGG, Method.BIRCH)
    n_init: int = 10
    max_iter: int = 300
    linkage: Linkage = Linkage.WARD
    birch_threshold: float | None = None  # None: derived from the data
    branching_factor: int = 50

    def __post_init__(self):
        methods = tuple(Method(m) for m in self.methods)
        if len(methods) < 2:
            raise ValueError("need at least two clustering methods to vote")
        if len(set(methods)) != len(methods):
            raise ValueError("clustering methods must be distinct")
        if self.k_over < 2:
            raise ValueError("k_over must be >= 2")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "linkage", Linkage(self.linkage))


@dataclass(frozen=True)
class VoteSettings:
    reference: Method = Method.KMEANS
    alignment: Alignment = Alignment.OPTIMAL

    def __post_init__(self):
        object.__setattr__(self, "reference", Method(self.reference))
        object.__setattr__(self, "alignment", Alignment(self.alignment))


@dataclass(frozen=True)
class RunConfig:
    features: str | None = None
    manifest: str | None = None
    out_dir: str = "runs/latest"
    seed: int = 0
    trials: int = 1
    pca: PcaSettings = field(default_factory=PcaSettings)
    umap: UmapSettings = field(default_factory=UmapSettings)
    cluster: ClusterSettings = field(default_factory=ClusterSettings)
    vote: VoteSettings = field(default_factory=VoteSettings)

    def __post_init__(self):
        if self.seed < 0 or self.seed > 2**64 - 1:
            raise ValueError("seed must fit in u64")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def _dataclass_from(cls, obj: dict):
    known = {f for f in cls.__dataclass_fields__}
    extra = set(obj) - known
    if extra:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(extra)}")
    return cls(**obj)


def config_from_dict(obj: dict) -> RunConfig:
    obj = dict(obj)
    sections = {}
    for name, cls in (
        ("pca", PcaSettings),
        ("umap", UmapSettings),
        ("cluster", ClusterSettings),
        ("vote", VoteSettings),
    ):
        if name in obj:
            section = dict(obj.pop(name))
            if name == "cluster" and "methods" in section:
                section["methods"] = tuple(Method(m) for m in section["methods"])
            sections[name] = _dataclass_from(cls, section)
    cfg = _dataclass_from(RunConfig, obj)
    return replace(cfg, **sections)


def load_config(path) -> RunConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def config_to_dict(cfg: RunConfig) -> dict:
    obj = asdict(cfg)
    obj["cluster"]["methods"] = [m.value for m in cfg.cluster.methods]
    obj["cluster"]["linkage"] = cfg.cluster.linkage.value
    obj["vote"]["reference"] = cfg.vote.reference.value
    obj["vote"]["alignment"] = cfg.vote.alignment.value
    return obj


def apply_flag_overrides(cfg: RunConfig, args) -> RunConfig:
    """Fold parsed CLI flags over a config. Only flags the user actually
    passed (non-None) take effect."""
    updates = {}
    for name in ("features", "manifest", "seed", "trials"):
        val = getattr(args, name, None)
        if val is not None:
            updates[name] = val
    if getattr(args, "out", None) is not None:
        updates["out_dir"] = args.out
    if getattr(args, "k_over", None) is not None:
        updates["cluster"] = replace(cfg.cluster, k_over=args.k_over)
    if getattr(args, "dims", None) is not None:
        updates["umap"] = replace(cfg.umap, out_dims=args.dims)
    if getattr(args, "no_pca", False):
        updates["pca"] = replace(cfg.pca, enabled=False)
    if getattr(args, "reference", None) is not None:
        updates["vote"] = replace(cfg.vote, reference=Method(args.reference.upper()))
    if getattr(args, "alignment", None) is not None:
        vote_cfg = updates.get("vote", cfg.vote)
        updates["vote"] = replace(vote_cfg, alignment=Alignment(args.alignment.upper()))
    return replace(cfg, **updates)
