"""Input resolution: image folders or index files, caption files, class lists."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

from .errors import DatasetError

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")

# the fixed template used to turn a class name into a prompt sentence
PROMPT_TEMPLATE = "a photo of {}."


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: Path
    label: str | None = None
    pairs: tuple[str, ...] = ()


@dataclass(frozen=True)
class TextRecord:
    id: str
    text: str
    pairs: tuple[str, ...] = ()


def load_image_records(spec) -> list[ImageRecord]:
    """Resolve an image input: a directory of files or a JSONL index.

    Directory mode lists supported files in sorted order with the stem as
    id. Index lines are {"id", "path", "label"?, "pairs"?} with paths
    relative to the index file.
    """
    spec = Path(spec)
    if spec.is_dir():
        files = sorted(
            p for p in spec.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not files:
            raise DatasetError(f"no image files found under {spec}")
        records = [ImageRecord(id=p.stem, path=p) for p in files]
    elif spec.is_file():
        records = []
        with open(spec, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"{spec}:{lineno}: invalid JSON: {exc.msg}") from None
                if "id" not in obj or "path" not in obj:
                    raise DatasetError(f"{spec}:{lineno}: index lines need id and path")
                records.append(
                    ImageRecord(
                        id=str(obj["id"]),
                        path=(spec.parent / obj["path"]).resolve(),
                        label=str(obj["label"]) if obj.get("label") is not None else None,
                        pairs=tuple(str(p) for p in obj.get("pairs", [])),
                    )
                )
        if not records:
            raise DatasetError(f"image index {spec} is empty")
    else:
        raise DatasetError(f"image input {spec} does not exist")
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DatasetError("image ids must be unique")
    missing = [str(r.path) for r in records if not r.path.is_file()]
    if missing:
        raise DatasetError(f"missing image files: {missing[:5]}")
    return records


def open_images(records: list[ImageRecord]) -> list[Image.Image]:
    images = []
    for rec in records:
        try:
            with Image.open(rec.path) as img:
                images.append(img.convert("RGB"))
        except OSError as exc:
            raise DatasetError(f"cannot read image {rec.path}: {exc}") from exc
    return images


def load_caption_records(path) -> list[TextRecord]:
    """Captions JSONL: {"id", "text", "pairs"?} with pairs naming image ids."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"caption file {path} does not exist")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            if "id" not in obj or "text" not in obj:
                raise DatasetError(f"{path}:{lineno}: caption lines need id and text")
            records.append(
                TextRecord(
                    id=str(obj["id"]),
                    text=str(obj["text"]),
                    pairs=tuple(str(p) for p in obj.get("pairs", [])),
                )
            )
    if not records:
        raise DatasetError(f"caption file {path} is empty")
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise DatasetError("caption ids must be unique")
    return records


def load_class_names(path) -> list[str]:
    """Class list: one name per line, order preserved, blanks skipped."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"class list {path} does not exist")
    names = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    names = [n for n in names if n]
    if not names:
        raise DatasetError(f"class list {path} is empty")
    if len(set(names)) != len(names):
        raise DatasetError("class names must be unique")
    return names


def class_prompts(names: list[str]) -> list[TextRecord]:
    return [TextRecord(id=name, text=PROMPT_TEMPLATE.format(name)) for name in names]
