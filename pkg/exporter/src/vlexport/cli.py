"""Command line for the exporter; flag names mirror the scoring engine's CLI."""

from __future__ import annotations

import argparse
import sys

from .backend import TAPS
from .errors import DatasetError, ExportError, ModelResolutionError
from .export import export_embeddings

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlexport",
        description="Export vision-language checkpoint embeddings to engine files.",
    )
    parser.add_argument("--model", required=True,
                        help="checkpoint id or local directory (transformers format)")
    parser.add_argument("--images", default=None,
                        help="directory of images or a JSONL index with id/path/label/pairs")
    parser.add_argument("--captions", default=None,
                        help="JSONL caption file with id/text/pairs")
    parser.add_argument("--classes", default=None,
                        help="text file of class names, one per line")
    parser.add_argument("--tap", default="post-projection",
                        choices=("post-projection", "pre-final-layernorm"),
                        help="feature tap point")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    tap = args.tap.replace("-", "_")
    assert tap in TAPS
    try:
        written = export_embeddings(
            args.model,
            args.out,
            images=args.images,
            captions=args.captions,
            classes=args.classes,
            tap=tap,
            batch_size=args.batch_size,
            device=args.device,
        )
    except (ModelResolutionError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for kind, path in sorted(written.items()):
        print(f"{kind}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
