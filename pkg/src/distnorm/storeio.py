"""Bit-exact on-disk formats: embeddings, manifests, ratings, reports.

Embedding container (extension-agnostic, conventionally .emb1):

    bytes 0..3   magic "EMB1"
    bytes 4..7   little-endian u32 version, currently 1
    bytes 8..11  little-endian u32 row count
    bytes 12..15 little-endian u32 dimension
    byte  16     dtype tag, 1 = float32
    bytes 17..19 zero padding
    payload      row-major little-endian float32, row_count * dim values

Row identities live in a JSONL sidecar manifest next to the binary
(<name>.manifest.jsonl). Score matrices use the same header layout with
magic "SCM1" and a float64 payload, plus a JSON sidecar holding the id
lists and config snapshot. All JSON reports serialize with sorted keys
and 17-significant-digit floats so goldens diff cleanly.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    IMAGE,
    MODALITIES,
    EmbeddingSet,
    PairedCorpus,
    PreferencePair,
    RatingRecord,
    ScoreMatrix,
    SimilarityConfig,
    TEXT,
)
from .errors import (
    BadMagic,
    DanglingId,
    DuplicateRow,
    InvalidConfig,
    ParseError,
    RowCountMismatch,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedVersion,
)

EMB_MAGIC = b"EMB1"
SCORE_MAGIC = b"SCM1"
_HEADER = struct.Struct("<4sIIIB3x")
DTYPE_F32 = 1
DTYPE_F64 = 2
_VERSION = 1


def manifest_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.jsonl")


def _write_header(fh, magic: bytes, rows: int, dim: int, dtype: int) -> None:
    fh.write(_HEADER.pack(magic, _VERSION, rows, dim, dtype))


def _read_header(fh, path, expected_magic: bytes) -> tuple[int, int, int]:
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"{path}: file shorter than the fixed header")
    magic, version, rows, dim, dtype = _HEADER.unpack(raw)
    if magic != expected_magic:
        raise BadMagic(f"{path}: expected magic {expected_magic!r}, found {magic!r}")
    if version != _VERSION:
        raise UnsupportedVersion(f"{path}: unsupported version {version}")
    return rows, dim, dtype


def _read_payload(fh, path, rows: int, dim: int, dtype) -> np.ndarray:
    expected = rows * dim * dtype().itemsize
    payload = fh.read()
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    return np.frombuffer(payload, dtype=np.dtype(dtype).newbyteorder("<")).reshape(rows, dim)


# -- embeddings ---------------------------------------------------------------


def write_embeddings(
    emb_set: EmbeddingSet,
    path,
    *,
    pairs: Mapping[str, Iterable[str]] | None = None,
    labels: Mapping[str, str] | None = None,
) -> None:
    """Write the binary container and its sidecar manifest.

    Values are stored as float32; pairs and labels, when given, are keyed
    by row id and end up on the matching manifest lines.
    """
    path = Path(path)
    with open(path, "wb") as fh:
        _write_header(fh, EMB_MAGIC, len(emb_set), emb_set.dim, DTYPE_F32)
        fh.write(
            np.ascontiguousarray(emb_set.matrix, dtype="<f4").tobytes()
        )
    records = []
    for row, row_id in enumerate(emb_set.ids):
        rec: dict = {"row": row, "id": row_id, "modality": emb_set.modality}
        if pairs and row_id in pairs:
            rec["pairs"] = sorted(str(p) for p in pairs[row_id])
        if labels and row_id in labels:
            rec["label"] = str(labels[row_id])
        records.append(rec)
    write_manifest(manifest_path_for(path), records)


def read_embeddings(path, manifest_path=None) -> EmbeddingSet:
    """Read a binary container plus its sidecar manifest back into a set.

    The normalized flag is re-derived from the stored rows (it has no home
    in the binary layout).
    """
    path = Path(path)
    with open(path, "rb") as fh:
        rows, dim, dtype = _read_header(fh, path, EMB_MAGIC)
        if dtype != DTYPE_F32:
            raise UnsupportedDtype(f"{path}: dtype tag {dtype} is not supported")
        matrix = _read_payload(fh, path, rows, dim, np.float32).astype(np.float64)
    records = read_manifest(manifest_path or manifest_path_for(path))
    if len(records) != rows:
        raise RowCountMismatch(
            f"{path}: header declares {rows} rows, manifest has {len(records)}"
        )
    ids = tuple(rec["id"] for rec in records)
    modalities = {rec["modality"] for rec in records}
    if len(modalities) != 1:
        raise InvalidConfig(f"{path}: manifest mixes modalities {sorted(modalities)}")
    norms = np.linalg.norm(matrix, axis=1) if rows else np.array([])
    normalized = bool(rows) and bool(np.all(np.abs(norms - 1.0) <= 1e-5))
    return EmbeddingSet(matrix, ids, modalities.pop(), normalized=normalized)


# -- JSONL sidecars -----------------------------------------------------------


def _jsonl_lines(path) -> Iterable[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(lineno, "line is not a JSON object")
            yield lineno, obj


def _require(obj: dict, key: str, lineno: int):
    if key not in obj:
        raise ParseError(lineno, f"missing required key {key!r}")
    return obj[key]


def write_manifest(path, records: Sequence[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    """Parse manifest lines; rows must be unique and cover 0..n-1."""
    records = []
    seen_rows: set[int] = set()
    for lineno, obj in _jsonl_lines(path):
        row = _require(obj, "row", lineno)
        if not isinstance(row, int) or isinstance(row, bool):
            raise ParseError(lineno, "row must be an integer")
        if row in seen_rows:
            raise DuplicateRow(f"{path}: row {row} appears more than once")
        seen_rows.add(row)
        row_id = _require(obj, "id", lineno)
        modality = _require(obj, "modality", lineno)
        if modality not in MODALITIES:
            raise ParseError(lineno, f"modality must be one of {MODALITIES}")
        pairs = obj.get("pairs", [])
        if not isinstance(pairs, list):
            raise ParseError(lineno, "pairs must be a list of ids")
        rec = {
            "row": row,
            "id": str(row_id),
            "modality": modality,
            "pairs": [str(p) for p in pairs],
        }
        if obj.get("label") is not None:
            rec["label"] = str(obj["label"])
        records.append(rec)
    if seen_rows != set(range(len(records))):
        raise RowCountMismatch(
            f"{path}: manifest rows do not cover 0..{len(records) - 1}"
        )
    records.sort(key=lambda r: r["row"])
    return records


def read_ratings(path) -> list[RatingRecord]:
    records = []
    for lineno, obj in _jsonl_lines(path):
        score = _require(obj, "human_score", lineno)
        if not isinstance(score, (int, float)) or isinstance(score, bool):
            raise ParseError(lineno, "human_score must be a number")
        refs = obj.get("references", [])
        if not isinstance(refs, list):
            raise ParseError(lineno, "references must be a list of ids")
        records.append(
            RatingRecord(
                image_id=str(_require(obj, "image_id", lineno)),
                candidate_id=str(_require(obj, "candidate_id", lineno)),
                human_score=float(score),
                reference_ids=tuple(str(r) for r in refs),
            )
        )
    return records


def read_preferences(path) -> list[PreferencePair]:
    records = []
    for lineno, obj in _jsonl_lines(path):
        choice = _require(obj, "choice", lineno)
        if choice not in ("A", "B"):
            raise ParseError(lineno, "choice must be 'A' or 'B'")
        category = _require(obj, "category", lineno)
        if category not in ("HC", "HI", "HM", "MM"):
            raise ParseError(lineno, "category must be one of HC, HI, HM, MM")
        records.append(
            PreferencePair(
                image_id=str(_require(obj, "image_id", lineno)),
                a_id=str(_require(obj, "a_id", lineno)),
                b_id=str(_require(obj, "b_id", lineno)),
                choice=choice,
                category=category,
            )
        )
    return records


# -- corpus assembly ----------------------------------------------------------


def load_corpus(
    images_path,
    texts_path,
    ratings_path=None,
    preferences_path=None,
) -> PairedCorpus:
    """Assemble a corpus from two embedding files plus optional ground truth.

    Links come from the manifests' pairs fields (either side may declare
    them); labels from the image manifest. Cross-references to unknown ids
    raise DanglingId.
    """
    image_set = read_embeddings(images_path)
    text_set = read_embeddings(texts_path)
    if image_set.modality != IMAGE or text_set.modality != TEXT:
        raise InvalidConfig(
            f"expected an image file and a text file, got {image_set.modality!r} "
            f"and {text_set.modality!r}"
        )
    image_records = read_manifest(manifest_path_for(images_path))
    text_records = read_manifest(manifest_path_for(texts_path))

    links: dict[str, set[str]] = {}
    labels: dict[str, str] = {}
    for rec in image_records:
        for tid in rec["pairs"]:
            if tid not in text_set:
                raise DanglingId(
                    f"image {rec['id']!r} pairs with unknown text id {tid!r}"
                )
            links.setdefault(rec["id"], set()).add(tid)
        if "label" in rec:
            if rec["label"] not in text_set:
                raise DanglingId(
                    f"image {rec['id']!r} labeled with unknown class id {rec['label']!r}"
                )
            labels[rec["id"]] = rec["label"]
    for rec in text_records:
        for iid in rec["pairs"]:
            if iid not in image_set:
                raise DanglingId(
                    f"text {rec['id']!r} pairs with unknown image id {iid!r}"
                )
            links.setdefault(iid, set()).add(rec["id"])

    ratings = None
    if ratings_path is not None:
        ratings = tuple(read_ratings(ratings_path))
        for r in ratings:
            if r.image_id not in image_set:
                raise DanglingId(f"rating references unknown image id {r.image_id!r}")
            for tid in (r.candidate_id, *r.reference_ids):
                if tid not in text_set:
                    raise DanglingId(f"rating references unknown text id {tid!r}")

    preferences = None
    if preferences_path is not None:
        preferences = tuple(read_preferences(preferences_path))
        for p in preferences:
            if p.image_id not in image_set:
                raise DanglingId(f"preference references unknown image id {p.image_id!r}")
            for tid in (p.a_id, p.b_id):
                if tid not in text_set:
                    raise DanglingId(f"preference references unknown text id {tid!r}")

    return PairedCorpus(
        image_set,
        text_set,
        {k: frozenset(v) for k, v in links.items()},
        labels=labels or None,
        ratings=ratings,
        preference_pairs=preferences,
    )


# -- score matrices -----------------------------------------------------------


def score_sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_score_matrix(scores: ScoreMatrix, path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        _write_header(fh, SCORE_MAGIC, scores.shape[0], scores.shape[1], DTYPE_F64)
        fh.write(np.ascontiguousarray(scores.scores, dtype="<f8").tobytes())
    sidecar = {
        "query_ids": list(scores.query_ids),
        "candidate_ids": list(scores.candidate_ids),
        "config": scores.config.to_dict(),
    }
    with open(score_sidecar_path(path), "w", encoding="utf-8") as fh:
        fh.write(dumps_report(sidecar) + "\n")


def read_score_matrix(path) -> ScoreMatrix:
    path = Path(path)
    with open(path, "rb") as fh:
        rows, cols, dtype = _read_header(fh, path, SCORE_MAGIC)
        if dtype != DTYPE_F64:
            raise UnsupportedDtype(f"{path}: dtype tag {dtype} is not supported")
        matrix = _read_payload(fh, path, rows, cols, np.float64)
    with open(score_sidecar_path(path), "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    query_ids = tuple(sidecar["query_ids"])
    candidate_ids = tuple(sidecar["candidate_ids"])
    if len(query_ids) != rows or len(candidate_ids) != cols:
        raise RowCountMismatch(
            f"{path}: sidecar id lists do not match the {rows}x{cols} header"
        )
    cfg = SimilarityConfig.from_dict(sidecar["config"])
    return ScoreMatrix(query_ids, candidate_ids, matrix, cfg)


# -- deterministic report JSON ------------------------------------------------


def _format_scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if not math.isfinite(f):
            raise InvalidConfig(f"reports cannot contain non-finite floats: {f!r}")
        return format(f, ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    raise InvalidConfig(f"unsupported report value type {type(value).__name__}")


def dumps_report(obj) -> str:
    """Render a report as deterministic JSON.

    Keys sort (numerically when all keys are integers) and floats print at
    17 significant digits, enough to round-trip float64 exactly.
    """
    if isinstance(obj, Mapping):
        keys = list(obj.keys())
        if keys and all(
            isinstance(k, (int, np.integer)) and not isinstance(k, bool) for k in keys
        ):
            keys.sort()
        else:
            keys.sort(key=str)
        parts = [f"{json.dumps(str(k))}: {dumps_report(obj[k])}" for k in keys]
        return "{" + ", ".join(parts) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps_report(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dumps_report(obj.tolist())
    return _format_scalar(obj)


def write_report(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_report(obj) + "\n")
