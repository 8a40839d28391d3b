"""Writers for the scoring engine's on-disk contract.

Binary layout: magic "EMB1", little-endian u32 version (1), u32 row
count, u32 dim, u8 dtype tag (1 = float32), 3 zero pad bytes, then a
row-major little-endian float32 payload. Row identities go to a JSONL
sidecar `<name>.manifest.jsonl` whose lines carry row/id/modality plus
optional pairs and label fields. The engine validates these byte for
byte, so nothing here may drift.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatchError

_HEADER = struct.Struct("<4sIIIB3x")
_MAGIC = b"EMB1"
_VERSION = 1
_DTYPE_F32 = 1


def manifest_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.jsonl")


class EmbeddingWriter:
    """Accumulates feature batches and writes one binary file at the end.

    The dimension is fixed by the first batch; any later batch with a
    different width is a hard error rather than a silently corrupt file.
    """

    def __init__(self):
        self._batches: list[np.ndarray] = []
        self._dim: int | None = None

    def add(self, batch: np.ndarray) -> None:
        batch = np.ascontiguousarray(batch, dtype=np.float32)
        if batch.ndim != 2:
            raise DimensionMismatchError(f"batch must be 2-D, got shape {batch.shape}")
        if self._dim is None:
            self._dim = batch.shape[1]
        elif batch.shape[1] != self._dim:
            raise DimensionMismatchError(
                f"batch width {batch.shape[1]} disagrees with declared dim {self._dim}"
            )
        self._batches.append(batch)

    @property
    def rows(self) -> int:
        return sum(b.shape[0] for b in self._batches)

    def write(self, path) -> None:
        if self._dim is None:
            raise DimensionMismatchError("no batches were added")
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, _VERSION, self.rows, self._dim, _DTYPE_F32))
            for batch in self._batches:
                fh.write(batch.astype("<f4", copy=False).tobytes())


def write_manifest(
    path,
    ids: Sequence[str],
    modality: str,
    *,
    pairs: Mapping[str, Iterable[str]] | None = None,
    labels: Mapping[str, str] | None = None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row, row_id in enumerate(ids):
            rec: dict = {"row": row, "id": row_id, "modality": modality}
            if pairs and row_id in pairs:
                rec["pairs"] = sorted(str(p) for p in pairs[row_id])
            if labels and row_id in labels:
                rec["label"] = str(labels[row_id])
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
