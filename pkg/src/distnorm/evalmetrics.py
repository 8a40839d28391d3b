"""Downstream evaluators: recall, classification accuracy, caption metrics.

All evaluators are pure functions of their inputs. Every argmax/sort uses
a stable tie-break on ascending candidate index so results are exactly
reproducible and match a brute-force full sort.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    EmbeddingSet,
    MeanVector,
    PairedCorpus,
    PREFERENCE_CATEGORIES,
    RefScoreInputs,
    ScoreMatrix,
    SimilarityConfig,
)
from .errors import (
    InvalidConfig,
    MissingLink,
    MissingPreferencePairs,
    ShapeMismatch,
    UnknownLabel,
)
from .kendall import TauReport, kendall_tau_b, kendall_tau_c
from .similarity import dn_star, pair_score, ref_based_clip, ref_based_dn, score_matrix


@dataclass(frozen=True)
class RecallReport:
    """Recall@k for one retrieval direction."""

    direction: str
    k_values: tuple[int, ...]
    recalls: dict[int, float]
    n_queries: int

    def __post_init__(self):
        previous = 0.0
        for k in self.k_values:
            value = self.recalls[k]
            if not (0.0 <= value <= 1.0):
                raise InvalidConfig(f"recall@{k} out of [0, 1]: {value}")
            if value < previous:
                raise InvalidConfig("recall must be non-decreasing in k")
            previous = value

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "k_values": list(self.k_values),
            "recalls": {int(k): float(v) for k, v in self.recalls.items()},
            "n_queries": int(self.n_queries),
        }


@dataclass(frozen=True)
class AccuracyReport:
    """Top-k classification accuracy."""

    k_values: tuple[int, ...]
    accuracies: dict[int, float]
    n_images: int

    def to_dict(self) -> dict:
        return {
            "k_values": list(self.k_values),
            "accuracies": {int(k): float(v) for k, v in self.accuracies.items()},
            "n_images": int(self.n_images),
        }


@dataclass(frozen=True)
class PreferenceReport:
    """Pairwise preference accuracy per category plus their unweighted mean."""

    per_category: dict[str, float]
    counts: dict[str, int]
    mean: float

    def to_dict(self) -> dict:
        return {
            "per_category": {k: float(v) for k, v in self.per_category.items()},
            "counts": {k: int(v) for k, v in self.counts.items()},
            "mean": float(self.mean),
        }


def _ranks_of(scores: np.ndarray) -> np.ndarray:
    """Rank (0 = best) of every candidate per query, stable on index ties."""
    order = np.argsort(-scores, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(scores.shape[0])[:, None]
    ranks[rows, order] = np.arange(scores.shape[1])[None, :]
    return ranks


def recall_at_k(
    scores: ScoreMatrix,
    links: Mapping[str, frozenset[str] | set[str]],
    ks: Sequence[int],
    direction: str = "image_to_text",
) -> RecallReport:
    """Fraction of queries whose top-k candidates intersect the link set.

    A query counts as a hit at k when any linked candidate ranks strictly
    inside the top k (descending score, ascending index on ties).
    """
    ks = tuple(sorted(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise InvalidConfig(f"k values must be positive integers, got {ks}")
    cand_index = {cid: i for i, cid in enumerate(scores.candidate_ids)}
    ranks = _ranks_of(scores.scores)
    best_link_rank = np.empty(len(scores.query_ids), dtype=np.int64)
    for qi, qid in enumerate(scores.query_ids):
        linked = links.get(qid)
        if not linked:
            raise MissingLink(qid)
        try:
            link_cols = [cand_index[cid] for cid in linked]
        except KeyError:
            raise MissingLink(qid) from None
        best_link_rank[qi] = ranks[qi, link_cols].min()
    n = len(scores.query_ids)
    recalls = {k: float(np.count_nonzero(best_link_rank < k) / n) for k in ks}
    return RecallReport(direction, ks, recalls, n)


def classify_topk(
    images: EmbeddingSet,
    class_prompts: EmbeddingSet,
    labels: Mapping[str, str],
    ks: Sequence[int],
    cfg: SimilarityConfig,
    *,
    mu_img: MeanVector | None = None,
    mu_txt: MeanVector | None = None,
    neg_images: EmbeddingSet | None = None,
    neg_texts: EmbeddingSet | None = None,
) -> AccuracyReport:
    """Acc@k: fraction of images whose true class prompt ranks in the top k."""
    ks = tuple(sorted(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise InvalidConfig(f"k values must be positive integers, got {ks}")
    if labels is None:
        raise UnknownLabel("no labels supplied")
    prompt_index = {cid: i for i, cid in enumerate(class_prompts.ids)}
    true_col = np.empty(len(images), dtype=np.int64)
    for qi, img_id in enumerate(images.ids):
        label = labels.get(img_id)
        if label is None:
            raise UnknownLabel(f"image {img_id!r} has no label")
        col = prompt_index.get(label)
        if col is None:
            raise UnknownLabel(f"label {label!r} is not a class prompt id")
        true_col[qi] = col
    scores = score_matrix(
        images, class_prompts, cfg,
        mu_img=mu_img, mu_txt=mu_txt, neg_images=neg_images, neg_texts=neg_texts,
    )
    ranks = _ranks_of(scores.scores)
    true_rank = ranks[np.arange(len(images)), true_col]
    n = len(images)
    accuracies = {k: float(np.count_nonzero(true_rank < k) / n) for k in ks}
    return AccuracyReport(ks, accuracies, n)


def preference_accuracy(
    corpus: PairedCorpus,
    cfg: SimilarityConfig,
    *,
    mu_img: MeanVector | None = None,
    mu_txt: MeanVector | None = None,
    neg_images: EmbeddingSet | None = None,
    neg_texts: EmbeddingSet | None = None,
) -> PreferenceReport:
    """Fraction of A/B caption pairs where the higher score matches the
    human choice; exact score ties credit 0.5.

    The overall figure is the unweighted mean of the per-category
    accuracies over the categories present.
    """
    if not corpus.preference_pairs:
        raise MissingPreferencePairs("corpus carries no preference pairs")
    credit: dict[str, float] = {}
    count: dict[str, int] = {}
    for pair in corpus.preference_pairs:
        img = corpus.image_set.get(pair.image_id)
        cap_a = corpus.text_set.get(pair.a_id)
        cap_b = corpus.text_set.get(pair.b_id)
        score_a = pair_score(img, cap_a, cfg, mu_img, mu_txt, neg_images, neg_texts)
        score_b = pair_score(img, cap_b, cfg, mu_img, mu_txt, neg_images, neg_texts)
        if score_a == score_b:
            gained = 0.5
        else:
            predicted = "A" if score_a > score_b else "B"
            gained = 1.0 if predicted == pair.choice else 0.0
        credit[pair.category] = credit.get(pair.category, 0.0) + gained
        count[pair.category] = count.get(pair.category, 0) + 1
    per_category = {
        cat: credit[cat] / count[cat]
        for cat in PREFERENCE_CATEGORIES
        if cat in count
    }
    mean = float(np.mean(list(per_category.values())))
    return PreferenceReport(per_category, dict(sorted(count.items())), mean)


REF_MODE_NONE = "none"
REF_MODE_CLIP = "clip"
REF_MODE_DN = "dn"
REF_MODE_DN_STAR = "dn-star"
REF_MODES = (REF_MODE_NONE, REF_MODE_CLIP, REF_MODE_DN, REF_MODE_DN_STAR)


def caption_scores(
    corpus: PairedCorpus,
    cfg: SimilarityConfig,
    ref_mode: str = REF_MODE_NONE,
    *,
    mu_img: MeanVector | None = None,
    mu_txt: MeanVector | None = None,
    neg_images: EmbeddingSet | None = None,
    neg_texts: EmbeddingSet | None = None,
) -> tuple[list[float], list[float]]:
    """Human and metric score lists for every rating record, in corpus order.

    ref_mode selects the reference-based combination: 'clip' takes the
    harmonic mean with the raw text-text maximum, 'dn' the arithmetic mean
    with the mean-centered one, and 'dn-star' replaces the image term of
    'dn' with the averaged DN/dot-product score.
    """
    if ref_mode not in REF_MODES:
        raise InvalidConfig(f"ref_mode must be one of {REF_MODES}, got {ref_mode!r}")
    if not corpus.ratings:
        raise InvalidConfig("corpus carries no ratings")
    if ref_mode in (REF_MODE_DN, REF_MODE_DN_STAR) and (mu_img is None or mu_txt is None):
        raise InvalidConfig(f"ref_mode {ref_mode!r} requires both modality means")
    human: list[float] = []
    metric: list[float] = []
    for record in corpus.ratings:
        img = corpus.image_set.get(record.image_id)
        cand = corpus.text_set.get(record.candidate_id)
        if ref_mode == REF_MODE_NONE:
            value = pair_score(img, cand, cfg, mu_img, mu_txt, neg_images, neg_texts)
        else:
            refs = tuple(corpus.text_set.get(r) for r in record.reference_ids)
            inputs = RefScoreInputs(img, cand, refs, mu_txt)
            if ref_mode == REF_MODE_CLIP:
                value = ref_based_clip(inputs)
            elif ref_mode == REF_MODE_DN:
                value = ref_based_dn(inputs, mu_img, cfg.mean_factor)
            else:
                # same combination as 'dn' but with the DN* image term
                my = mu_txt.values
                centered_cand = cand.values - my
                ref_term = max(
                    float(np.dot(r.values - my, centered_cand)) for r in refs
                )
                img_term = dn_star(img, cand, mu_img, mu_txt, cfg.mean_factor)
                value = (img_term + ref_term) / 2.0
        human.append(float(record.human_score))
        metric.append(float(value))
    return human, metric


def caption_correlation(
    corpus: PairedCorpus,
    cfg: SimilarityConfig,
    coefficient: str,
    ref_mode: str = REF_MODE_NONE,
    **score_kwargs,
) -> TauReport:
    """Kendall correlation between human ratings and metric scores."""
    human, metric = caption_scores(corpus, cfg, ref_mode, **score_kwargs)
    if coefficient == "tau_b":
        return kendall_tau_b(human, metric)
    if coefficient == "tau_c":
        return kendall_tau_c(human, metric)
    raise InvalidConfig(f"coefficient must be tau_b or tau_c, got {coefficient!r}")


def rank_agreement(scores_a: ScoreMatrix, scores_b: ScoreMatrix) -> TauReport:
    """Tau-b between two score matrices over the same pairs, flattened.

    Quantifies how much ranking information one measure loses relative to
    another; monotone transforms score exactly 1.
    """
    if (
        scores_a.query_ids != scores_b.query_ids
        or scores_a.candidate_ids != scores_b.candidate_ids
    ):
        raise ShapeMismatch("score matrices cover different query/candidate ids")
    return kendall_tau_b(scores_a.scores.ravel(), scores_b.scores.ravel())
