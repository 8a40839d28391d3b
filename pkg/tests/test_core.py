import numpy as np
import pytest

from distnorm.core import (
    Embedding,
    EmbeddingSet,
    MeanVector,
    Measure,
    PairedCorpus,
    PreferencePair,
    ScoreMatrix,
    SimilarityConfig,
    l2_normalize,
)
from distnorm.errors import (
    InvalidConfig,
    NonFiniteInput,
    NonFiniteScore,
    NonPositiveTau,
    ZeroNormRow,
)


def make_set(matrix, modality="image", ids=None, **kw):
    matrix = np.asarray(matrix, dtype=float)
    if ids is None:
        ids = tuple(f"{modality[0]}{i}" for i in range(matrix.shape[0]))
    return EmbeddingSet(matrix, ids, modality, **kw)


class TestEmbedding:
    def test_basic(self):
        e = Embedding([1.0, 2.0], "a", "image")
        assert e.dim == 2
        assert e.values.dtype == np.float64

    def test_rejects_nan(self):
        with pytest.raises(NonFiniteInput):
            Embedding([1.0, float("nan")], "a", "image")

    def test_rejects_bad_modality(self):
        with pytest.raises(InvalidConfig):
            Embedding([1.0], "a", "audio")

    def test_values_read_only(self):
        e = Embedding([1.0, 2.0], "a", "image")
        with pytest.raises(ValueError):
            e.values[0] = 5.0


class TestEmbeddingSet:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvalidConfig):
            make_set([[1.0, 0.0], [0.0, 1.0]], ids=("a", "a"))

    def test_matrix_read_only(self):
        s = make_set([[1.0, 0.0]])
        with pytest.raises(ValueError):
            s.matrix[0, 0] = 2.0

    def test_source_mutation_does_not_leak(self):
        src = np.array([[1.0, 0.0]])
        s = make_set(src)
        src[0, 0] = 9.0
        assert s.matrix[0, 0] == 1.0

    def test_normalized_flag_checked(self):
        with pytest.raises(InvalidConfig):
            make_set([[2.0, 0.0]], normalized=True)

    def test_lookup(self):
        s = make_set([[1.0, 0.0], [0.0, 1.0]], ids=("a", "b"))
        assert s.index_of("b") == 1
        assert s.get("a").id == "a"
        assert "a" in s and "z" not in s

    def test_from_rows_modality_mismatch(self):
        rows = [Embedding([1.0], "a", "image"), Embedding([1.0], "b", "text")]
        with pytest.raises(InvalidConfig):
            EmbeddingSet.from_rows(rows)


class TestL2Normalize:
    def test_three_four_five(self):
        s = l2_normalize(make_set([[3.0, 4.0]]))
        assert np.allclose(s.matrix[0], [0.6, 0.8])
        assert s.normalized

    def test_unit_row_unchanged(self):
        s = l2_normalize(make_set([[1.0, 0.0]]))
        assert np.array_equal(s.matrix[0], [1.0, 0.0])

    def test_zero_row_raises(self):
        with pytest.raises(ZeroNormRow) as exc:
            l2_normalize(make_set([[1.0, 0.0], [0.0, 0.0]], ids=("ok", "bad")))
        assert exc.value.row_id == "bad"

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        s = make_set(rng.standard_normal((20, 7)))
        once = l2_normalize(s)
        twice = l2_normalize(once)
        assert np.max(np.abs(twice.matrix - once.matrix)) <= 1e-12

    def test_order_and_ids_preserved(self):
        s = make_set([[2.0, 0.0], [0.0, 3.0]], ids=("x", "y"))
        out = l2_normalize(s)
        assert out.ids == ("x", "y")


class TestMeanVector:
    def test_count_must_match(self):
        with pytest.raises(InvalidConfig):
            MeanVector([1.0], "image", ("a", "b"), None, 1)

    def test_count_at_least_one(self):
        with pytest.raises(InvalidConfig):
            MeanVector([1.0], "image", (), None, 0)


class TestSimilarityConfig:
    def test_defaults(self):
        cfg = SimilarityConfig()
        assert cfg.measure is Measure.S0
        assert cfg.tau == 0.01
        assert cfg.mean_factor == 0.5
        assert cfg.normalize_on_load

    def test_tau_positive(self):
        with pytest.raises(NonPositiveTau):
            SimilarityConfig(tau=0.0)
        with pytest.raises(NonPositiveTau):
            SimilarityConfig(tau=-1.0)

    def test_factor_range(self):
        with pytest.raises(InvalidConfig):
            SimilarityConfig(mean_factor=0.0)
        with pytest.raises(InvalidConfig):
            SimilarityConfig(mean_factor=1.5)
        SimilarityConfig(mean_factor=1.0)  # closed upper end

    def test_requirements(self):
        assert not SimilarityConfig(measure=Measure.S0).requires_means
        assert SimilarityConfig(measure=Measure.DN).requires_means
        assert SimilarityConfig(measure=Measure.FULL).requires_negatives

    def test_roundtrip_dict(self):
        cfg = SimilarityConfig(measure=Measure.DN_STAR, tau=0.5, mean_factor=0.7)
        assert SimilarityConfig.from_dict(cfg.to_dict()) == cfg


class TestPairedCorpus:
    def _sets(self):
        return (
            make_set([[1.0, 0.0], [0.0, 1.0]], "image", ("i0", "i1")),
            make_set([[1.0, 0.0], [0.0, 1.0]], "text", ("t0", "t1")),
        )

    def test_links_must_resolve(self):
        img, txt = self._sets()
        with pytest.raises(InvalidConfig):
            PairedCorpus(img, txt, {"i0": {"missing"}})

    def test_empty_link_entry_rejected(self):
        img, txt = self._sets()
        with pytest.raises(InvalidConfig):
            PairedCorpus(img, txt, {"i0": set()})

    def test_links_for_inverts(self):
        img, txt = self._sets()
        corpus = PairedCorpus(img, txt, {"i0": {"t0", "t1"}, "i1": {"t1"}})
        t2i = corpus.links_for("text_to_image")
        assert t2i["t1"] == {"i0", "i1"}
        assert t2i["t0"] == {"i0"}

    def test_label_must_resolve(self):
        img, txt = self._sets()
        with pytest.raises(InvalidConfig):
            PairedCorpus(img, txt, {"i0": {"t0"}}, labels={"i0": "nope"})

    def test_preference_choice_validated(self):
        with pytest.raises(InvalidConfig):
            PreferencePair("i0", "t0", "t1", "C", "HC")
        with pytest.raises(InvalidConfig):
            PreferencePair("i0", "t0", "t1", "A", "XX")


class TestScoreMatrix:
    def test_shape_checked(self):
        with pytest.raises(InvalidConfig):
            ScoreMatrix(("q",), ("a", "b"), np.zeros((1, 3)), SimilarityConfig())

    def test_non_finite_named_with_coordinates(self):
        scores = np.zeros((2, 2))
        scores[1, 0] = np.nan
        with pytest.raises(NonFiniteScore) as exc:
            ScoreMatrix(("q0", "q1"), ("c0", "c1"), scores, SimilarityConfig())
        assert "q1" in str(exc.value) and "c0" in str(exc.value)

    def test_transposed(self):
        m = ScoreMatrix(("q",), ("a", "b"), np.array([[1.0, 2.0]]), SimilarityConfig())
        t = m.transposed()
        assert t.query_ids == ("a", "b")
        assert t.scores.shape == (2, 1)
