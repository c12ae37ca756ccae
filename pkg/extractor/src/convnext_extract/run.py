"""Directory walk, preprocessing, batched inference, and output writing."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torchvision.transforms import functional as TF

from .fmat import write_fmat
from .model import DEFAULT_VARIANT, build_model, feature_dim

log = logging.getLogger("extract")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}

# resize short side to 256, crop the center 256x256, ImageNet normalization
INPUT_EDGE = 256
NORM_MEAN = (0.485, 0.456, 0.406)
NORM_STD = (0.229, 0.224, 0.225)


@dataclass
class ExtractionJob:
    image_dir: Path
    out_path: Path
    manifest_path: Path
    thumb_dir: Path
    recursive: bool = False
    batch: int = 32
    device: str = "cpu"
    variant: str = DEFAULT_VARIANT
    weights: Path | None = None
    seed: int = 0
    thumb_edge: int = 128

    def __post_init__(self):
        self.image_dir = Path(self.image_dir)
        self.out_path = Path(self.out_path)
        self.manifest_path = Path(self.manifest_path)
        self.thumb_dir = Path(self.thumb_dir)
        if self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")


@dataclass
class ExtractionResult:
    rows: int
    dim: int
    skipped: list = field(default_factory=list)


def list_images(root: Path, recursive: bool) -> list[str]:
    """Relative posix paths of image files under root, sorted."""
    it = root.rglob("*") if recursive else root.glob("*")
    rels = [
        p.relative_to(root).as_posix()
        for p in it
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    return sorted(rels)


def preprocess(img: Image.Image) -> torch.Tensor:
    img = img.convert("RGB")
    img = TF.resize(img, INPUT_EDGE, antialias=True)
    img = TF.center_crop(img, INPUT_EDGE)
    t = TF.to_tensor(img)
    return TF.normalize(t, NORM_MEAN, NORM_STD)


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", "utf-8")


def extract(job: ExtractionJob) -> ExtractionResult:
    """Run the job: features.fmat + manifest + thumbnails (+ skip sidecar).

    Row order is the sorted relative path order. Images that fail to
    decode are logged, listed in <manifest>.skipped.json, and excluded
    from both the matrix and the manifest so the two always align.
    """
    rels = list_images(job.image_dir, job.recursive)
    if not rels:
        raise FileNotFoundError(f"no image files under {job.image_dir}")

    device = torch.device(job.device)
    model = build_model(job.variant, job.weights, job.seed).to(device)
    job.thumb_dir.mkdir(parents=True, exist_ok=True)

    ids: list[str] = []
    records: list[dict] = []
    skipped: list[dict] = []
    chunks: list[np.ndarray] = []
    pending: list[torch.Tensor] = []

    def flush():
        if not pending:
            return
        batch = torch.stack(pending).to(device)
        with torch.no_grad():
            out = model(batch)
        chunks.append(out.cpu().numpy().astype(np.float32))
        pending.clear()

    for rel in rels:
        src = job.image_dir / rel
        try:
            with Image.open(src) as im:
                im.load()
                tensor = preprocess(im)
                thumb = im.convert("RGB")
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            log.warning("skipping %s: %s", rel, exc)
            skipped.append({"path": rel, "error": str(exc)})
            continue

        # collision-safe: keep the original name, append .png
        thumb_path = job.thumb_dir / (rel + ".png")
        thumb_path.parent.mkdir(parents=True, exist_ok=True)
        thumb.thumbnail((job.thumb_edge, job.thumb_edge))
        thumb.save(thumb_path, format="PNG")

        ids.append(rel)
        records.append(
            {
                "id": rel,
                "source_path": str(src),
                "thumbnail_path": str(thumb_path),
            }
        )
        pending.append(tensor)
        if len(pending) == job.batch:
            flush()
    flush()

    if not ids:
        raise ValueError(f"none of the {len(rels)} images could be decoded")

    features = np.concatenate(chunks, axis=0)
    write_fmat(features, ids, job.out_path)
    _json_dump(records, job.manifest_path)
    if skipped:
        side = job.manifest_path.with_name(job.manifest_path.stem + ".skipped.json")
        _json_dump(skipped, side)
        log.warning("skipped %d of %d images, see %s", len(skipped), len(rels), side)

    record = {
        "variant": job.variant,
        "feature_dim": feature_dim(job.variant),
        "weights": str(job.weights) if job.weights else None,
        "seed": job.seed,
        "input_edge": INPUT_EDGE,
        "preprocess": "resize-short-side-256, center-crop-256, imagenet-norm",
        "batch": job.batch,
        "device": job.device,
        "rows": len(ids),
        "skipped": len(skipped),
    }
    _json_dump(record, job.out_path.with_name(job.out_path.stem + ".extraction.json"))

    log.info("wrote %d x %d features to %s", features.shape[0], features.shape[1], job.out_path)
    return ExtractionResult(rows=len(ids), dim=int(features.shape[1]), skipped=skipped)
