"""Export orchestration: run a checkpoint over inputs, emit engine files.

This package only produces embeddings and manifests; similarity scoring
lives entirely in the consuming engine so every formula has exactly one
implementation.
"""

from __future__ import annotations

from pathlib import Path

from .backend import ClipBackend, TAP_POST_PROJECTION
from .datasets import (
    ImageRecord,
    TextRecord,
    class_prompts,
    load_caption_records,
    load_class_names,
    load_image_records,
    open_images,
)
from .errors import DatasetError
from .formats import EmbeddingWriter, manifest_path_for, write_manifest

IMAGES_FILE = "images.emb1"
CAPTIONS_FILE = "captions.emb1"
PROMPTS_FILE = "prompts.emb1"


def export_images(
    backend: ClipBackend,
    records: list[ImageRecord],
    tap: str,
    out_path,
    batch_size: int = 32,
) -> None:
    features = backend.encode_images(open_images(records), tap, batch_size)
    writer = EmbeddingWriter()
    writer.add(features)
    writer.write(out_path)
    write_manifest(
        manifest_path_for(out_path),
        [r.id for r in records],
        "image",
        pairs={r.id: r.pairs for r in records if r.pairs},
        labels={r.id: r.label for r in records if r.label is not None},
    )


def export_texts(
    backend: ClipBackend,
    records: list[TextRecord],
    tap: str,
    out_path,
    batch_size: int = 64,
    *,
    self_label: bool = False,
) -> None:
    features = backend.encode_texts([r.text for r in records], tap, batch_size)
    writer = EmbeddingWriter()
    writer.add(features)
    writer.write(out_path)
    write_manifest(
        manifest_path_for(out_path),
        [r.id for r in records],
        "text",
        pairs={r.id: r.pairs for r in records if r.pairs},
        labels={r.id: r.id for r in records} if self_label else None,
    )


def export_embeddings(
    model_id,
    out_dir,
    *,
    images=None,
    captions=None,
    classes=None,
    tap: str = TAP_POST_PROJECTION,
    batch_size: int = 32,
    device: str = "cpu",
    backend: ClipBackend | None = None,
) -> dict[str, Path]:
    """Run a checkpoint over the given inputs and write engine files.

    At least one of images/captions/classes must be supplied. model_id is
    resolved through transformers unless a prepared backend is passed
    (tests inject tiny local models that way). Returns the written
    embedding file paths keyed by kind.
    """
    if images is None and captions is None and classes is None:
        raise DatasetError("nothing to export: give images, captions, or classes")
    if backend is None:
        backend = ClipBackend.from_pretrained(model_id, device=device)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    if images is not None:
        path = out_dir / IMAGES_FILE
        export_images(backend, load_image_records(images), tap, path, batch_size)
        written["images"] = path
    if captions is not None:
        path = out_dir / CAPTIONS_FILE
        export_texts(backend, load_caption_records(captions), tap, path, batch_size)
        written["captions"] = path
    if classes is not None:
        path = out_dir / PROMPTS_FILE
        records = class_prompts(load_class_names(classes))
        export_texts(backend, records, tap, path, batch_size, self_label=True)
        written["prompts"] = path
    return written
