"""Similarity measures for image-text embedding pairs.

The measures form a chain of approximations to a contrastive training
objective evaluated at test time:

    s0                zeroth order, the plain dot product x . y
    s1_dn             first order: (x - f*mu_x) . (y - f*mu_y), f = 1/2
    dn_star           (s0 + s1_dn) / 2, a robustness compromise
    geometric_sim     -(a + b) / (2*tau), an affine relative of s1_dn
    first_order_exp   -log(e^{a/tau} + e^{b/tau})
    full_sim          -log of exponentiated margins averaged over explicit
                      negative sets (the expensive reference measure)

with a = x . (mu_y - y) and b = (mu_x - x) . y. Every measure returns
"higher means more similar"; the two expectation-style measures are
negated log-distances computed in the log domain so they stay finite at
small temperatures where direct exponentiation overflows.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import (
    IMAGE,
    TEXT,
    Embedding,
    EmbeddingSet,
    MeanVector,
    Measure,
    RefScoreInputs,
    ScoreMatrix,
    SimilarityConfig,
)
from .errors import (
    DimensionMismatch,
    EmptyNegativeSet,
    EmptyReferences,
    InvalidConfig,
    NonPositiveTau,
)


def _vec(x) -> np.ndarray:
    if isinstance(x, (Embedding, MeanVector)):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _check_dims(*vecs) -> int:
    dims = {v.size for v in vecs}
    if len(dims) != 1:
        raise DimensionMismatch(f"operand dimensions differ: {sorted(dims)}")
    return dims.pop()


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not np.isfinite(tau) or tau <= 0:
        raise NonPositiveTau(f"tau must be a positive finite real, got {tau!r}")
    return tau


def _check_factor(factor: float) -> float:
    factor = float(factor)
    if not np.isfinite(factor) or not (0.0 < factor <= 1.0):
        raise InvalidConfig(f"mean factor must lie in (0, 1], got {factor!r}")
    return factor


def s0(img, txt) -> float:
    """Zeroth-order similarity: the raw dot product."""
    x, y = _vec(img), _vec(txt)
    _check_dims(x, y)
    return float(np.dot(x, y))


def s1_dn(img, txt, mu_x, mu_y, factor: float = 0.5) -> float:
    """First-order similarity: dot product after subtracting factor*mean.

    The default factor 1/2 is what the first-order expansion yields; no
    renormalization happens after the subtraction.
    """
    factor = _check_factor(factor)
    x, y, mx, my = _vec(img), _vec(txt), _vec(mu_x), _vec(mu_y)
    _check_dims(x, y, mx, my)
    return float(np.dot(x - factor * mx, y - factor * my))


def dn_star(img, txt, mu_x, mu_y, factor: float = 0.5) -> float:
    """Arithmetic mean of the raw dot product and the mean-subtracted one."""
    return (s0(img, txt) + s1_dn(img, txt, mu_x, mu_y, factor)) / 2.0


def _margins(x, y, mx, my) -> tuple[float, float]:
    # a: margin of the text mean over the true text, from the image side.
    # b: margin of the image mean over the true image, from the text side.
    a = float(np.dot(x, my - y))
    b = float(np.dot(mx - x, y))
    return a, b


def first_order_exp_sim(img, txt, mu_x, mu_y, tau: float) -> float:
    """Negated log of e^{a/tau} + e^{b/tau}, evaluated in the log domain."""
    tau = _check_tau(tau)
    x, y, mx, my = _vec(img), _vec(txt), _vec(mu_x), _vec(mu_y)
    _check_dims(x, y, mx, my)
    a, b = _margins(x, y, mx, my)
    return float(-np.logaddexp(a / tau, b / tau))


def geometric_sim(img, txt, mu_x, mu_y, tau: float) -> float:
    """Negated log of the geometric-mean distance, -(a + b) / (2*tau).

    Exactly affine in s1_dn at factor 1/2:
        geometric_sim * tau + 0.25 * (mu_x . mu_y) == s1_dn
    so the two induce identical rankings for fixed means and tau.
    """
    tau = _check_tau(tau)
    x, y, mx, my = _vec(img), _vec(txt), _vec(mu_x), _vec(mu_y)
    _check_dims(x, y, mx, my)
    a, b = _margins(x, y, mx, my)
    return float(-(a + b) / (2.0 * tau))


def _full_rows(
    x: np.ndarray,
    cand: np.ndarray,
    neg_img: np.ndarray,
    neg_txt: np.ndarray,
    tau: float,
) -> np.ndarray:
    """full_sim of one image row against every candidate text row.

    cand is (C, dim); returns (C,). The same code path serves the scalar
    operation (C = 1) and the matrix scorer, so the two agree exactly.
    """
    n_txt = neg_txt.shape[0]
    n_img = neg_img.shape[0]
    pos = cand @ x  # (C,) dot products with the query image
    # exponent blocks: (C, n_txt) margins over negative texts,
    # (C, n_img) margins over negative images
    a = (neg_txt @ x)[None, :] - pos[:, None]
    b = (cand @ neg_img.T) - pos[:, None]
    z = np.concatenate([a, b], axis=1) / tau
    weights = np.concatenate(
        [np.full(n_txt, 1.0 / n_txt), np.full(n_img, 1.0 / n_img)]
    )
    return -logsumexp(z, axis=1, b=weights[None, :])


def full_sim(img, txt, neg_images: EmbeddingSet, neg_texts: EmbeddingSet, tau: float) -> float:
    """Negated log of exponentiated margins averaged over explicit negatives.

    Each negative set contributes the mean of e^{margin/tau} over its rows;
    the whole sum is evaluated as a single weighted log-sum-exp with max
    subtraction, so the result is finite wherever the margins are.
    """
    tau = _check_tau(tau)
    if len(neg_images) == 0 or len(neg_texts) == 0:
        raise EmptyNegativeSet("both negative sets must be non-empty")
    x, y = _vec(img), _vec(txt)
    _check_dims(x, y, neg_images.matrix[0], neg_texts.matrix[0])
    out = _full_rows(x, y[None, :], neg_images.matrix, neg_texts.matrix, tau)
    return float(out[0])


def _h_mean_clamped(a: float, b: float) -> float:
    # Harmonic mean is undefined for non-positive inputs; score 0 there.
    if a <= 0.0 or b <= 0.0:
        return 0.0
    return 2.0 * a * b / (a + b)


def ref_based_clip(inputs: RefScoreInputs) -> float:
    """Harmonic mean of image-candidate and best reference-candidate dot products."""
    if not inputs.references:
        raise EmptyReferences("reference list is empty")
    y = inputs.candidate.values
    img_term = float(np.dot(inputs.image.values, y))
    ref_term = max(float(np.dot(r.values, y)) for r in inputs.references)
    return _h_mean_clamped(img_term, ref_term)


def ref_based_dn(inputs: RefScoreInputs, mu_x, factor: float = 0.5) -> float:
    """Arithmetic mean of the mean-subtracted image term and the best
    mean-centered reference term.

    The text-text term subtracts the full text mean on both sides, while
    the image-candidate term uses factor*mean; the two conventions are kept
    as-is rather than harmonized.
    """
    if not inputs.references:
        raise EmptyReferences("reference list is empty")
    if inputs.mu_y is None:
        raise InvalidConfig("mean-centered reference scoring needs the text mean")
    factor = _check_factor(factor)
    my = inputs.mu_y.values
    y = inputs.candidate.values
    img_term = s1_dn(inputs.image, inputs.candidate, mu_x, inputs.mu_y, factor)
    y_centered = y - my
    ref_term = max(float(np.dot(r.values - my, y_centered)) for r in inputs.references)
    return (img_term + ref_term) / 2.0


def pair_score(
    img: Embedding,
    txt: Embedding,
    cfg: SimilarityConfig,
    mu_img: MeanVector | None = None,
    mu_txt: MeanVector | None = None,
    neg_images: EmbeddingSet | None = None,
    neg_texts: EmbeddingSet | None = None,
) -> float:
    """Score one image-text pair under the configured measure."""
    m = cfg.measure
    if m is Measure.S0:
        return s0(img, txt)
    if m is Measure.FULL:
        if neg_images is None or neg_texts is None:
            raise InvalidConfig("FULL requires both negative sets")
        return full_sim(img, txt, neg_images, neg_texts, cfg.tau)
    if mu_img is None or mu_txt is None:
        raise InvalidConfig(f"measure {m.value} requires both modality means")
    if m is Measure.DN:
        return s1_dn(img, txt, mu_img, mu_txt, cfg.mean_factor)
    if m is Measure.DN_STAR:
        return dn_star(img, txt, mu_img, mu_txt, cfg.mean_factor)
    if m is Measure.FIRST_ORDER_EXP:
        return first_order_exp_sim(img, txt, mu_img, mu_txt, cfg.tau)
    if m is Measure.GEOMETRIC:
        return geometric_sim(img, txt, mu_img, mu_txt, cfg.tau)
    raise InvalidConfig(f"unhandled measure {m!r}")


def _validate_roles(
    queries: EmbeddingSet, candidates: EmbeddingSet
) -> tuple[EmbeddingSet, EmbeddingSet, bool]:
    """Map (queries, candidates) onto (image set, text set) roles."""
    if queries.modality == IMAGE and candidates.modality == TEXT:
        return queries, candidates, False
    if queries.modality == TEXT and candidates.modality == IMAGE:
        return candidates, queries, True
    raise InvalidConfig(
        "score_matrix needs one image set and one text set, got "
        f"{queries.modality!r} queries and {candidates.modality!r} candidates"
    )


def score_matrix(
    queries: EmbeddingSet,
    candidates: EmbeddingSet,
    cfg: SimilarityConfig,
    *,
    mu_img: MeanVector | None = None,
    mu_txt: MeanVector | None = None,
    neg_images: EmbeddingSet | None = None,
    neg_texts: EmbeddingSet | None = None,
) -> ScoreMatrix:
    """Score every query against every candidate under one config.

    Entry (q, c) equals the scalar operation applied to that pair; the
    image-modality argument always takes the image slot, so either modality
    may play the query role. Accumulation order within a row is fixed
    (ascending candidate index), keeping output independent of any internal
    parallelism.
    """
    images, texts, swapped = _validate_roles(queries, candidates)
    if images.dim != texts.dim:
        raise DimensionMismatch(
            f"query dim {queries.dim} does not match candidate dim {candidates.dim}"
        )
    m = cfg.measure

    if m is Measure.FULL:
        if neg_images is None or neg_texts is None:
            raise InvalidConfig("FULL requires both negative sets")
        if len(neg_images) == 0 or len(neg_texts) == 0:
            raise EmptyNegativeSet("both negative sets must be non-empty")
        if neg_images.dim != images.dim or neg_texts.dim != images.dim:
            raise DimensionMismatch("negative set dimensions must match the inputs")
    elif m is not Measure.S0:
        if mu_img is None or mu_txt is None:
            raise InvalidConfig(f"measure {m.value} requires both modality means")
        if mu_img.modality != IMAGE or mu_txt.modality != TEXT:
            raise InvalidConfig("means must carry image and text modalities respectively")
        if mu_img.dim != images.dim or mu_txt.dim != images.dim:
            raise DimensionMismatch("mean dimensions must match the embedding sets")

    X = images.matrix
    Y = texts.matrix

    if m is Measure.S0:
        S = X @ Y.T
    elif m is Measure.DN:
        f = cfg.mean_factor
        S = (X - f * mu_img.values) @ (Y - f * mu_txt.values).T
    elif m is Measure.DN_STAR:
        f = cfg.mean_factor
        S = ((X @ Y.T) + (X - f * mu_img.values) @ (Y - f * mu_txt.values).T) / 2.0
    elif m is Measure.GEOMETRIC:
        dots = X @ Y.T
        ax = X @ mu_txt.values  # per-image constant x . mu_y
        by = Y @ mu_img.values  # per-text constant mu_x . y
        S = (2.0 * dots - ax[:, None] - by[None, :]) / (2.0 * cfg.tau)
    elif m is Measure.FIRST_ORDER_EXP:
        dots = X @ Y.T
        a = (X @ mu_txt.values)[:, None] - dots
        b = (Y @ mu_img.values)[None, :] - dots
        S = -np.logaddexp(a / cfg.tau, b / cfg.tau)
    else:  # FULL
        S = np.empty((X.shape[0], Y.shape[0]))
        for qi in range(X.shape[0]):
            S[qi] = _full_rows(X[qi], Y, neg_images.matrix, neg_texts.matrix, cfg.tau)

    if swapped:
        S = S.T
    return ScoreMatrix(queries.ids, candidates.ids, S, cfg)
