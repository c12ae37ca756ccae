"""extract --images DIR --out features.fmat --manifest manifest.json --thumbs DIR"""

import argparse
import logging
import sys
from pathlib import Path

from .model import DEFAULT_VARIANT, VARIANTS
from .run import ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="extract",
        description="Encode an image directory to penultimate ConvNeXt activations",
    )
    p.add_argument("--images", required=True, type=Path, help="image directory")
    p.add_argument("--out", required=True, type=Path, help="output .fmat path")
    p.add_argument("--manifest", required=True, type=Path, help="output manifest JSON")
    p.add_argument("--thumbs", required=True, type=Path, help="thumbnail directory")
    p.add_argument("--batch", type=int, default=32, help="inference batch size")
    p.add_argument("--recursive", action="store_true", help="descend into subdirectories")
    p.add_argument("--variant", choices=sorted(VARIANTS), default=DEFAULT_VARIANT)
    p.add_argument("--weights", type=Path, default=None, help="checkpoint file (state dict)")
    p.add_argument("--seed", type=int, default=0, help="init seed when no weights are given")
    p.add_argument("--device", default="cpu", help="torch device hint")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        image_dir=args.images,
        out_path=args.out,
        manifest_path=args.manifest,
        thumb_dir=args.thumbs,
        recursive=args.recursive,
        batch=args.batch,
        device=args.device,
        variant=args.variant,
        weights=args.weights,
        seed=args.seed,
    )
    try:
        result = extract(job)
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{result.rows} x {result.dim} -> {args.out} ({len(result.skipped)} skipped)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
