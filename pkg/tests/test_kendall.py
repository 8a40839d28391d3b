import math

import numpy as np
import pytest
import scipy.stats

from distnorm.errors import DegenerateInput, LengthMismatch
from distnorm.kendall import (
    _count_direct,
    _count_inversions,
    _count_mergesort,
    kendall_tau_b,
    kendall_tau_c,
)


def pair_count_oracle(x, y):
    """Dumb quadratic pair walk, independent of the library's counters."""
    n = len(x)
    conc = disc = tx = ty = txy = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = int(x[j] > x[i]) - int(x[j] < x[i])
            dy = int(y[j] > y[i]) - int(y[j] < y[i])
            if dx and dy:
                if dx == dy:
                    conc += 1
                else:
                    disc += 1
            elif not dx and not dy:
                txy += 1
            elif not dx:
                tx += 1
            else:
                ty += 1
    return conc, disc, tx, ty, txy


def tied_instance(rng):
    n = int(rng.integers(2, 51))
    x = rng.integers(0, 6, n).astype(float)
    y = rng.choice(np.array([0.1, 0.25, 0.5, 0.5, 0.9]), size=n)
    return x, y


class TestFixtures:
    def test_perfect_agreement(self):
        assert kendall_tau_b([1, 2, 3], [0.1, 0.2, 0.3]).value == 1.0

    def test_perfect_reversal(self):
        assert kendall_tau_b([1, 2, 3], [0.3, 0.2, 0.1]).value == -1.0

    def test_tau_b_tie_fixture(self):
        report = kendall_tau_b([1, 1, 2], [0.1, 0.2, 0.3])
        assert report.concordant == 2
        assert report.discordant == 0
        assert report.ties_x == 1
        assert report.ties_y == 0
        assert report.value == pytest.approx(2.0 / math.sqrt(6.0), abs=1e-12)

    def test_tau_c_tie_fixture(self):
        report = kendall_tau_c([1, 1, 2], [0.1, 0.2, 0.3])
        assert report.value == pytest.approx(8.0 / 9.0, abs=1e-12)

    def test_tau_c_perfect_no_ties(self):
        assert kendall_tau_c([1, 2, 3, 4], [1.0, 2.0, 3.0, 4.0]).value == pytest.approx(1.0, abs=1e-15)

    def test_tau_c_reversal(self):
        assert kendall_tau_c([1, 2, 3, 4], [4.0, 3.0, 2.0, 1.0]).value == pytest.approx(-1.0, abs=1e-15)


class TestErrors:
    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            kendall_tau_b([1, 2], [1, 2, 3])

    def test_too_short(self):
        with pytest.raises(DegenerateInput):
            kendall_tau_b([1], [1])

    def test_all_tied_x(self):
        with pytest.raises(DegenerateInput):
            kendall_tau_b([2, 2, 2], [1, 2, 3])

    def test_all_tied_y(self):
        with pytest.raises(DegenerateInput):
            kendall_tau_b([1, 2, 3], [7, 7, 7])

    def test_tau_c_needs_two_distinct(self):
        with pytest.raises(DegenerateInput):
            kendall_tau_c([1, 1, 1], [1, 2, 3])


class TestAgainstOracle:
    def test_both_backends_match_oracle_exactly(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            x, y = tied_instance(rng)
            expected = pair_count_oracle(list(x), list(y))
            for counter in (_count_direct, _count_mergesort):
                got = counter(x, y)
                assert (
                    got.concordant,
                    got.discordant,
                    got.ties_x_only,
                    got.ties_y_only,
                    got.ties_both,
                ) == expected

    def test_counts_partition_all_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            x, y = tied_instance(rng)
            c = _count_direct(x, y)
            n = len(x)
            total = c.concordant + c.discordant + c.ties_x_only + c.ties_y_only + c.ties_both
            assert total == n * (n - 1) // 2

    def test_backends_agree_at_scale(self):
        rng = np.random.default_rng(13)
        for n in (1_000, 4_097, 15_000):
            x = rng.integers(0, 40, n).astype(float)
            y = np.round(rng.standard_normal(n), 2)
            d = _count_direct(x, y)
            m = _count_mergesort(x, y)
            assert d == m

    def test_explicit_algorithm_selection(self):
        x = np.array([1.0, 1.0, 2.0, 3.0])
        y = np.array([0.5, 0.4, 0.4, 0.9])
        via_direct = kendall_tau_b(x, y, algorithm="direct")
        via_merge = kendall_tau_b(x, y, algorithm="mergesort")
        assert via_direct == via_merge


class TestInversionCounter:
    def test_matches_quadratic(self):
        rng = np.random.default_rng(3)
        for _ in range(80):
            n = int(rng.integers(0, 300))
            values = rng.integers(0, 12, n).astype(float)
            expected = sum(
                1
                for i in range(n)
                for j in range(i + 1, n)
                if values[i] > values[j]
            )
            assert _count_inversions(values) == expected

    def test_sorted_input(self):
        assert _count_inversions(np.arange(1000, dtype=float)) == 0

    def test_reversed_input(self):
        n = 1000
        assert _count_inversions(np.arange(n, dtype=float)[::-1].copy()) == n * (n - 1) // 2


class TestProperties:
    def test_values_bounded(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            x, y = tied_instance(rng)
            try:
                assert -1.0 <= kendall_tau_b(x, y).value <= 1.0
                assert -1.0 <= kendall_tau_c(x, y).value <= 1.0
            except DegenerateInput:
                continue

    def test_negation_antisymmetry_tie_free(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            n = int(rng.integers(2, 40))
            x = rng.permutation(n).astype(float)
            y = rng.standard_normal(n)
            assert kendall_tau_b(x, y).value == pytest.approx(-kendall_tau_b(x, -y).value, abs=1e-15)
            assert kendall_tau_c(x, y).value == pytest.approx(-kendall_tau_c(x, -y).value, abs=1e-15)

    def test_tau_b_equals_tau_a_without_ties(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            n = int(rng.integers(2, 60))
            x = rng.permutation(n).astype(float)
            y = rng.permutation(n).astype(float)
            report = kendall_tau_b(x, y)
            tau_a = (report.concordant - report.discordant) / (n * (n - 1) / 2)
            assert report.value == pytest.approx(tau_a, abs=1e-12)

    def test_matches_scipy_variants(self):
        rng = np.random.default_rng(19)
        for _ in range(40):
            n = int(rng.integers(4, 120))
            x = rng.integers(0, 7, n).astype(float)
            y = rng.integers(0, 7, n).astype(float)
            try:
                mine_b = kendall_tau_b(x, y).value
                mine_c = kendall_tau_c(x, y).value
            except DegenerateInput:
                continue
            assert mine_b == pytest.approx(
                scipy.stats.kendalltau(x, y, variant="b").statistic, abs=1e-12
            )
            assert mine_c == pytest.approx(
                scipy.stats.kendalltau(x, y, variant="c").statistic, abs=1e-12
            )
