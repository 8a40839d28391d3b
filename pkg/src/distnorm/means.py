"""Modality mean estimation and the sample-count ablation driver.

Sampling is uniform without replacement through numpy's seeded PCG64
generator; sampled indices are sorted back into set order so that an
exhaustive sample reproduces the full-set mean bit for bit.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import EmbeddingSet, MeanVector, PairedCorpus, SimilarityConfig
from .errors import EmptySet, InvalidConfig, SampleSizeOutOfRange

# Recorded in reports so a corpus can be tied back to the generator that
# sampled it; bitwise reproducibility is promised within a build only.
GENERATOR_ID = "numpy.PCG64"


def exact_mean(emb_set: EmbeddingSet) -> MeanVector:
    """Component-wise arithmetic mean over every row of the set."""
    if len(emb_set) == 0:
        raise EmptySet("cannot take the mean of an empty set")
    values = emb_set.matrix.mean(axis=0)
    return MeanVector(
        values=values,
        modality=emb_set.modality,
        source_ids=emb_set.ids,
        seed=None,
        count=len(emb_set),
    )


def _sample_indices(rng: np.random.Generator, population: int, n: int) -> np.ndarray:
    idx = rng.choice(population, size=n, replace=False)
    idx.sort()
    return idx


def sampled_mean(emb_set: EmbeddingSet, n: int, seed: int) -> MeanVector:
    """Mean over n rows drawn uniformly without replacement by a seeded PCG64.

    Deterministic: the same (set, n, seed) always yields the same mean and
    the same source_ids. n equal to the set size reproduces exact_mean.
    """
    if len(emb_set) == 0:
        raise EmptySet("cannot sample from an empty set")
    if not (1 <= n <= len(emb_set)):
        raise SampleSizeOutOfRange(
            f"sample size {n} outside [1, {len(emb_set)}]"
        )
    rng = np.random.default_rng(int(seed))
    idx = _sample_indices(rng, len(emb_set), n)
    values = emb_set.matrix[idx].mean(axis=0)
    return MeanVector(
        values=values,
        modality=emb_set.modality,
        source_ids=tuple(emb_set.ids[i] for i in idx),
        seed=int(seed),
        count=n,
    )


TASK_RETRIEVAL = "retrieval"
TASK_CLASSIFICATION = "classification"


def _retrieval_metrics(corpus: PairedCorpus, cfg, mu_img, mu_txt) -> dict:
    from . import evalmetrics, similarity
    from .core import IMAGE_TO_TEXT, TEXT_TO_IMAGE

    scores = similarity.score_matrix(
        corpus.image_set, corpus.text_set, cfg, mu_img=mu_img, mu_txt=mu_txt
    )
    i2t = evalmetrics.recall_at_k(scores, corpus.links_for(IMAGE_TO_TEXT), [1], IMAGE_TO_TEXT)
    t2i = evalmetrics.recall_at_k(
        scores.transposed(), corpus.links_for(TEXT_TO_IMAGE), [1], TEXT_TO_IMAGE
    )
    return {"i2t_r1": i2t.recalls[1], "t2i_r1": t2i.recalls[1]}


def _classification_metrics(corpus: PairedCorpus, cfg, mu_img, mu_txt) -> dict:
    from . import evalmetrics

    report = evalmetrics.classify_topk(
        corpus.image_set, corpus.text_set, corpus.labels, [1], cfg,
        mu_img=mu_img, mu_txt=mu_txt,
    )
    return {"acc1": report.accuracies[1]}


def ablate_sample_counts(
    corpus: PairedCorpus,
    counts: Sequence[int],
    seeds: Sequence[int],
    task: str,
    cfg: SimilarityConfig,
) -> dict:
    """Rerun a task evaluation with means estimated from sampled subsets.

    For each (count, seed) the modality means are re-estimated with
    sampled_mean and the task metric recomputed. Retrieval samples both
    modalities with the same seed, so the estimate comes from matched
    pairs; classification keeps the text mean exact over all class
    prompts, the only text rows present at scoring time. The report
    carries every run, the per-count mean and standard deviation across
    seeds, and the exact-mean upper bound.
    """
    if task not in (TASK_RETRIEVAL, TASK_CLASSIFICATION):
        raise InvalidConfig(f"task must be retrieval or classification, got {task!r}")
    counts = [int(c) for c in counts]
    seeds = [int(s) for s in seeds]
    if not counts:
        raise InvalidConfig("counts must be non-empty")
    if not seeds:
        raise InvalidConfig("seeds must be non-empty")
    limit = len(corpus.image_set)
    if task == TASK_RETRIEVAL:
        limit = min(limit, len(corpus.text_set))
    for c in counts:
        if not (1 <= c <= limit):
            raise SampleSizeOutOfRange(f"count {c} outside [1, {limit}]")
    if task == TASK_CLASSIFICATION and corpus.labels is None:
        raise InvalidConfig("classification ablation needs a labeled corpus")

    evaluate = _retrieval_metrics if task == TASK_RETRIEVAL else _classification_metrics
    mu_txt_exact = exact_mean(corpus.text_set)
    exact = evaluate(corpus, cfg, exact_mean(corpus.image_set), mu_txt_exact)

    runs = []
    for count in counts:
        for seed in seeds:
            mu_img = sampled_mean(corpus.image_set, count, seed)
            if task == TASK_RETRIEVAL:
                mu_txt = sampled_mean(corpus.text_set, count, seed)
            else:
                mu_txt = mu_txt_exact
            metrics = evaluate(corpus, cfg, mu_img, mu_txt)
            runs.append({"count": count, "seed": seed, "metrics": metrics})

    metric_names = sorted(exact.keys())
    per_count = []
    for count in counts:
        entry: dict = {"count": count}
        for name in metric_names:
            values = np.array(
                [r["metrics"][name] for r in runs if r["count"] == count]
            )
            entry[name] = {"mean": float(values.mean()), "std": float(values.std())}
        per_count.append(entry)

    return {
        "task": task,
        "config": cfg.to_dict(),
        "generator": GENERATOR_ID,
        "counts": counts,
        "seeds": seeds,
        "exact": exact,
        "runs": runs,
        "per_count": per_count,
    }
