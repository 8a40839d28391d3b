"""Core value types: embeddings, sets, means, configs, corpora, score matrices.

Everything here is immutable after construction and safe to share across
threads. Embedding payloads live in read-only float64 arrays; storage on
disk is float32 (see storeio) and every reduction accumulates in 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyReferences,
    InvalidConfig,
    NonFiniteInput,
    NonFiniteScore,
    NonPositiveTau,
    ZeroNormRow,
)

IMAGE = "image"
TEXT = "text"
MODALITIES = (IMAGE, TEXT)

IMAGE_TO_TEXT = "image_to_text"
TEXT_TO_IMAGE = "text_to_image"
DIRECTIONS = (IMAGE_TO_TEXT, TEXT_TO_IMAGE)

# Rows flagged as normalized must have L2 norm within this of 1.
UNIT_NORM_TOL = 1e-5
# Below this norm a row cannot be meaningfully normalized.
ZERO_NORM_FLOOR = 1e-12


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


def _check_modality(modality: str) -> None:
    if modality not in MODALITIES:
        raise InvalidConfig(f"modality must be one of {MODALITIES}, got {modality!r}")


@dataclass(frozen=True, eq=False)
class Embedding:
    """A single encoded vector with an opaque identity and a modality."""

    values: np.ndarray
    id: str
    modality: str

    def __post_init__(self):
        _check_modality(self.modality)
        vals = _readonly(np.atleast_1d(self.values))
        if vals.ndim != 1 or vals.size < 1:
            raise InvalidConfig(f"embedding {self.id!r} must be a 1-D vector of dimension >= 1")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteInput(f"embedding {self.id!r} contains non-finite components")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """An ordered, immutable collection of same-modality embeddings.

    The matrix is (n_rows, dim) float64 and read-only. The ``normalized``
    flag is advisory: when set, every row must be unit L2 within 1e-5,
    but operations never renormalize silently.
    """

    matrix: np.ndarray
    ids: tuple[str, ...]
    modality: str
    normalized: bool = False

    def __post_init__(self):
        _check_modality(self.modality)
        mat = _readonly(self.matrix)
        if mat.ndim != 2:
            raise InvalidConfig("embedding matrix must be 2-D (rows x dim)")
        if mat.shape[1] < 1:
            raise InvalidConfig("embedding dimension must be >= 1")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != mat.shape[0]:
            raise InvalidConfig(
                f"id count {len(ids)} does not match row count {mat.shape[0]}"
            )
        if len(set(ids)) != len(ids):
            raise InvalidConfig("ids must be unique within a set")
        if not np.all(np.isfinite(mat)):
            raise NonFiniteInput("embedding matrix contains non-finite components")
        if self.normalized and len(ids) > 0:
            norms = np.linalg.norm(mat, axis=1)
            worst = np.argmax(np.abs(norms - 1.0))
            if abs(norms[worst] - 1.0) > UNIT_NORM_TOL:
                raise InvalidConfig(
                    f"set flagged normalized but row {ids[worst]!r} has norm {norms[worst]!r}"
                )
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_index", {rid: i for i, rid in enumerate(ids)})

    @classmethod
    def from_rows(
        cls, rows: Sequence[Embedding], *, normalized: bool = False
    ) -> "EmbeddingSet":
        if not rows:
            raise InvalidConfig("cannot build a set from zero rows without a dimension")
        modality = rows[0].modality
        for r in rows:
            if r.modality != modality:
                raise InvalidConfig("all rows in a set must share one modality")
            if r.dim != rows[0].dim:
                raise DimensionMismatch(
                    f"row {r.id!r} has dim {r.dim}, expected {rows[0].dim}"
                )
        mat = np.stack([r.values for r in rows])
        return cls(mat, tuple(r.id for r in rows), modality, normalized)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row(self, i: int) -> Embedding:
        return Embedding(self.matrix[i], self.ids[i], self.modality)

    def get(self, row_id: str) -> Embedding:
        idx = self._index.get(row_id)
        if idx is None:
            raise KeyError(f"no row with id {row_id!r}")
        return self.row(idx)

    def index_of(self, row_id: str) -> int:
        idx = self._index.get(row_id)
        if idx is None:
            raise KeyError(f"no row with id {row_id!r}")
        return idx

    def __contains__(self, row_id: str) -> bool:
        return row_id in self._index


def l2_normalize(emb_set: EmbeddingSet) -> EmbeddingSet:
    """Return a copy of the set with every row scaled to unit L2 norm.

    Order and ids are preserved; the result carries normalized=True.
    Raises ZeroNormRow for any row with norm below 1e-12.
    """
    mat = emb_set.matrix
    norms = np.linalg.norm(mat, axis=1)
    bad = np.where(norms < ZERO_NORM_FLOOR)[0]
    if bad.size:
        raise ZeroNormRow(emb_set.ids[int(bad[0])])
    out = mat / norms[:, None]
    return EmbeddingSet(out, emb_set.ids, emb_set.modality, normalized=True)


@dataclass(frozen=True, eq=False)
class MeanVector:
    """A modality mean with full provenance of the rows that produced it."""

    values: np.ndarray
    modality: str
    source_ids: tuple[str, ...]
    seed: int | None
    count: int

    def __post_init__(self):
        _check_modality(self.modality)
        vals = _readonly(np.atleast_1d(self.values))
        if vals.ndim != 1:
            raise InvalidConfig("mean vector must be 1-D")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteInput("mean vector contains non-finite components")
        ids = tuple(str(i) for i in self.source_ids)
        if self.count != len(ids) or self.count < 1:
            raise InvalidConfig(
                f"count {self.count} must equal len(source_ids) {len(ids)} and be >= 1"
            )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "source_ids", ids)

    @property
    def dim(self) -> int:
        return self.values.size


class Measure(str, Enum):
    """Selectable similarity measures, ordered by approximation fidelity."""

    S0 = "S0"
    DN = "DN"
    DN_STAR = "DN_STAR"
    FIRST_ORDER_EXP = "FIRST_ORDER_EXP"
    GEOMETRIC = "GEOMETRIC"
    FULL = "FULL"


# Measures whose per-pair formulas consume the modality means.
_MEAN_MEASURES = frozenset(
    {Measure.DN, Measure.DN_STAR, Measure.FIRST_ORDER_EXP, Measure.GEOMETRIC}
)


@dataclass(frozen=True)
class SimilarityConfig:
    """Scoring configuration: measure, temperature, mean-subtraction factor.

    tau only affects the expectation-style measures; rankings under DN are
    temperature-free. mean_factor defaults to 1/2, the value the first-order
    derivation produces.
    """

    measure: Measure = Measure.S0
    tau: float = 0.01
    mean_factor: float = 0.5
    normalize_on_load: bool = True

    def __post_init__(self):
        measure = Measure(self.measure)
        object.__setattr__(self, "measure", measure)
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise NonPositiveTau(f"tau must be a positive finite real, got {self.tau!r}")
        if not np.isfinite(self.mean_factor) or not (0.0 < self.mean_factor <= 1.0):
            raise InvalidConfig(
                f"mean_factor must lie in (0, 1], got {self.mean_factor!r}"
            )

    @property
    def requires_means(self) -> bool:
        return self.measure in _MEAN_MEASURES

    @property
    def requires_negatives(self) -> bool:
        return self.measure is Measure.FULL

    def to_dict(self) -> dict:
        return {
            "measure": self.measure.value,
            "tau": float(self.tau),
            "mean_factor": float(self.mean_factor),
            "normalize_on_load": bool(self.normalize_on_load),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SimilarityConfig":
        return cls(
            measure=Measure(d["measure"]),
            tau=float(d["tau"]),
            mean_factor=float(d["mean_factor"]),
            normalize_on_load=bool(d["normalize_on_load"]),
        )


@dataclass(frozen=True, eq=False)
class RatingRecord:
    """One human judgment of a candidate caption for an image."""

    image_id: str
    candidate_id: str
    human_score: float
    reference_ids: tuple[str, ...] = ()


PREFERENCE_CATEGORIES = ("HC", "HI", "HM", "MM")


@dataclass(frozen=True, eq=False)
class PreferencePair:
    """A human A/B choice between two captions for the same image."""

    image_id: str
    a_id: str
    b_id: str
    choice: str
    category: str

    def __post_init__(self):
        if self.choice not in ("A", "B"):
            raise InvalidConfig(f"choice must be 'A' or 'B', got {self.choice!r}")
        if self.category not in PREFERENCE_CATEGORIES:
            raise InvalidConfig(
                f"category must be one of {PREFERENCE_CATEGORIES}, got {self.category!r}"
            )


@dataclass(frozen=True, eq=False)
class PairedCorpus:
    """Two modality sets plus every form of ground truth attached to them.

    links is canonical image -> set of correct text ids; use links_for()
    to obtain either retrieval direction.
    """

    image_set: EmbeddingSet
    text_set: EmbeddingSet
    links: Mapping[str, frozenset[str]]
    labels: Mapping[str, str] | None = None
    ratings: tuple[RatingRecord, ...] | None = None
    preference_pairs: tuple[PreferencePair, ...] | None = None

    def __post_init__(self):
        if self.image_set.modality != IMAGE or self.text_set.modality != TEXT:
            raise InvalidConfig("corpus requires an image set and a text set")
        links = {str(k): frozenset(str(v) for v in vs) for k, vs in self.links.items()}
        for img_id, text_ids in links.items():
            if img_id not in self.image_set:
                raise InvalidConfig(f"link query {img_id!r} not in image set")
            if not text_ids:
                raise InvalidConfig(f"link entry for {img_id!r} is empty")
            for tid in text_ids:
                if tid not in self.text_set:
                    raise InvalidConfig(f"link candidate {tid!r} not in text set")
        object.__setattr__(self, "links", links)
        if self.labels is not None:
            labels = {str(k): str(v) for k, v in self.labels.items()}
            for img_id, class_id in labels.items():
                if img_id not in self.image_set:
                    raise InvalidConfig(f"labeled id {img_id!r} not in image set")
                if class_id not in self.text_set:
                    raise InvalidConfig(f"label {class_id!r} not in text set")
            object.__setattr__(self, "labels", labels)
        if self.ratings is not None:
            ratings = tuple(self.ratings)
            for r in ratings:
                if r.image_id not in self.image_set:
                    raise InvalidConfig(f"rating image {r.image_id!r} not in image set")
                if r.candidate_id not in self.text_set:
                    raise InvalidConfig(
                        f"rating candidate {r.candidate_id!r} not in text set"
                    )
                for ref in r.reference_ids:
                    if ref not in self.text_set:
                        raise InvalidConfig(f"rating reference {ref!r} not in text set")
            object.__setattr__(self, "ratings", ratings)
        if self.preference_pairs is not None:
            pairs = tuple(self.preference_pairs)
            for p in pairs:
                if p.image_id not in self.image_set:
                    raise InvalidConfig(f"preference image {p.image_id!r} not in image set")
                for cid in (p.a_id, p.b_id):
                    if cid not in self.text_set:
                        raise InvalidConfig(f"preference caption {cid!r} not in text set")
            object.__setattr__(self, "preference_pairs", pairs)

    def links_for(self, direction: str) -> dict[str, frozenset[str]]:
        """Ground-truth links oriented for the given retrieval direction."""
        if direction == IMAGE_TO_TEXT:
            return dict(self.links)
        if direction == TEXT_TO_IMAGE:
            inverted: dict[str, set[str]] = {}
            for img_id, text_ids in self.links.items():
                for tid in text_ids:
                    inverted.setdefault(tid, set()).add(img_id)
            return {k: frozenset(v) for k, v in inverted.items()}
        raise InvalidConfig(f"direction must be one of {DIRECTIONS}, got {direction!r}")


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Query x candidate similarity values plus the config that produced them."""

    query_ids: tuple[str, ...]
    candidate_ids: tuple[str, ...]
    scores: np.ndarray
    config: SimilarityConfig

    def __post_init__(self):
        mat = _readonly(self.scores)
        q_ids = tuple(str(i) for i in self.query_ids)
        c_ids = tuple(str(i) for i in self.candidate_ids)
        if mat.ndim != 2 or mat.shape != (len(q_ids), len(c_ids)):
            raise InvalidConfig(
                f"score shape {mat.shape} does not match id lists "
                f"({len(q_ids)} x {len(c_ids)})"
            )
        if not np.all(np.isfinite(mat)):
            q, c = (int(x) for x in np.argwhere(~np.isfinite(mat))[0])
            raise NonFiniteScore(
                f"non-finite score at query {q_ids[q]!r} (row {q}), "
                f"candidate {c_ids[c]!r} (col {c})"
            )
        object.__setattr__(self, "scores", mat)
        object.__setattr__(self, "query_ids", q_ids)
        object.__setattr__(self, "candidate_ids", c_ids)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def transposed(self) -> "ScoreMatrix":
        """Swap query and candidate roles (used for text-to-image retrieval)."""
        return ScoreMatrix(self.candidate_ids, self.query_ids, self.scores.T, self.config)


@dataclass(frozen=True, eq=False)
class RefScoreInputs:
    """Inputs for reference-based caption scoring: image, candidate, references.

    mu_y is only consumed by the mean-centered combination and may be None
    when scoring with the plain harmonic-mean one.
    """

    image: Embedding
    candidate: Embedding
    references: tuple[Embedding, ...]
    mu_y: MeanVector | None = None

    def __post_init__(self):
        refs = tuple(self.references)
        if not refs:
            raise EmptyReferences("reference-based scoring needs at least one reference")
        dim = self.image.dim
        if self.candidate.dim != dim:
            raise DimensionMismatch("image and candidate dimensions must agree")
        if self.mu_y is not None and self.mu_y.dim != dim:
            raise DimensionMismatch("text mean dimension must match the embeddings")
        for r in refs:
            if r.dim != dim:
                raise DimensionMismatch(f"reference {r.id!r} has dim {r.dim}, expected {dim}")
        object.__setattr__(self, "references", refs)
