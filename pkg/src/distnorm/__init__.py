"""Mean-centered similarity scoring and evaluation for cross-modal embeddings.

The package scores precomputed image/text embeddings under a family of
related measures (plain dot product, mean-subtracted variants, and
expectation-style reference measures) and evaluates them on retrieval,
zero-shot classification, caption-rating correlation, and pairwise
preference tasks.
"""

from .core import (
    IMAGE,
    IMAGE_TO_TEXT,
    TEXT,
    TEXT_TO_IMAGE,
    Embedding,
    EmbeddingSet,
    MeanVector,
    Measure,
    PairedCorpus,
    PreferencePair,
    RatingRecord,
    RefScoreInputs,
    ScoreMatrix,
    SimilarityConfig,
    l2_normalize,
)
from .kendall import TauReport, kendall_tau_b, kendall_tau_c
from .means import ablate_sample_counts, exact_mean, sampled_mean
from .evalmetrics import (
    AccuracyReport,
    PreferenceReport,
    RecallReport,
    caption_correlation,
    classify_topk,
    preference_accuracy,
    rank_agreement,
    recall_at_k,
)
from .similarity import (
    dn_star,
    first_order_exp_sim,
    full_sim,
    geometric_sim,
    pair_score,
    ref_based_clip,
    ref_based_dn,
    s0,
    s1_dn,
    score_matrix,
)
from .synth import SynthConfig, generate

__version__ = "0.1.0"
