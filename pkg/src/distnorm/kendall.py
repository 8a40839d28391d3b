"""Kendall rank correlation with full tie accounting.

Two interchangeable pair-counting backends: a direct O(n^2) sweep used up
to 10k observations, and an O(n log n) merge-count used above that (some
rating corpora reach ~50k pairs, and flattened score matrices reach
millions). Both produce identical integer counts and are cross-checked
exactly in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, LengthMismatch

# Switch point between the O(n^2) sweep and the merge-count backend.
DIRECT_LIMIT = 10_000

TAU_B = "tau_b"
TAU_C = "tau_c"


@dataclass(frozen=True)
class TauReport:
    """A rank-correlation value plus the pair counts that produced it.

    ties_x / ties_y count pairs tied in exactly one of the two lists;
    pairs tied in both are excluded from every field.
    """

    variant: str
    value: float
    n: int
    concordant: int
    discordant: int
    ties_x: int
    ties_y: int

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "value": float(self.value),
            "n": int(self.n),
            "concordant": int(self.concordant),
            "discordant": int(self.discordant),
            "ties_x": int(self.ties_x),
            "ties_y": int(self.ties_y),
        }


@dataclass(frozen=True)
class _PairCounts:
    concordant: int
    discordant: int
    ties_x_only: int
    ties_y_only: int
    ties_both: int


def _count_direct(x: np.ndarray, y: np.ndarray) -> _PairCounts:
    n = x.size
    conc = disc = tx = ty = txy = 0
    for i in range(n - 1):
        x_rise = x[i + 1 :] > x[i]
        x_fall = x[i + 1 :] < x[i]
        x_tied = ~(x_rise | x_fall)
        y_rise = y[i + 1 :] > y[i]
        y_fall = y[i + 1 :] < y[i]
        y_tied = ~(y_rise | y_fall)
        conc += int(np.count_nonzero((x_rise & y_rise) | (x_fall & y_fall)))
        disc += int(np.count_nonzero((x_rise & y_fall) | (x_fall & y_rise)))
        tx += int(np.count_nonzero(x_tied & ~y_tied))
        ty += int(np.count_nonzero(y_tied & ~x_tied))
        txy += int(np.count_nonzero(x_tied & y_tied))
    return _PairCounts(conc, disc, tx, ty, txy)


def _count_inversions(values: np.ndarray) -> int:
    """Strict inversions (i < j with values[i] > values[j]) in O(n log n).

    Bottom-up merge counting. Blocks of 64 are handled by one broadcast
    pass, then sorted runs are merged pairwise; padding with +inf at the
    tail adds no inversions.
    """
    n = values.size
    if n < 2:
        return 0
    base = 64
    n_pad = -(-n // base) * base
    buf = np.full(n_pad, np.inf)
    buf[:n] = values
    total = 0
    blocks = buf.reshape(-1, base)
    upper = np.triu(np.ones((base, base), dtype=bool), k=1)
    chunk = 4096  # bounds the (chunk, 64, 64) broadcast temporary
    for start in range(0, blocks.shape[0], chunk):
        part = blocks[start : start + chunk]
        total += int(np.count_nonzero((part[:, :, None] > part[:, None, :]) & upper))
    blocks.sort(axis=1)
    width = base
    while width < n_pad:
        for start in range(0, n_pad, 2 * width):
            mid = start + width
            if mid >= n_pad:
                break
            end = min(start + 2 * width, n_pad)
            left = buf[start:mid]
            right = buf[mid:end]
            less_than_left = np.searchsorted(right, left, side="left")
            total += int(less_than_left.sum())
            merged = np.empty(end - start)
            merged[np.arange(left.size) + less_than_left] = left
            merged[np.arange(right.size) + np.searchsorted(left, right, side="right")] = right
            buf[start:end] = merged
        width *= 2
    return total


def _tie_pairs(sorted_values: np.ndarray) -> int:
    _, counts = np.unique(sorted_values, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def _count_mergesort(x: np.ndarray, y: np.ndarray) -> _PairCounts:
    n = x.size
    order = np.lexsort((y, x))
    xs = x[order]
    ys = y[order]
    disc = _count_inversions(ys)
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(np.sort(y))
    # pairs tied in both: identical (x, y) tuples sit in contiguous runs
    # of the lexsorted order, so count run lengths
    change = (np.diff(xs) != 0) | (np.diff(ys) != 0)
    run_ends = np.concatenate([np.flatnonzero(change) + 1, [n]])
    run_sizes = np.diff(np.concatenate([[0], run_ends]))
    txy = int(np.sum(run_sizes * (run_sizes - 1) // 2))
    conc = n0 - n1 - n2 + txy - disc
    return _PairCounts(conc, disc, n1 - txy, n2 - txy, txy)


def _pair_counts(x: np.ndarray, y: np.ndarray, algorithm: str) -> _PairCounts:
    if algorithm == "direct" or (algorithm == "auto" and x.size <= DIRECT_LIMIT):
        return _count_direct(x, y)
    if algorithm in ("mergesort", "auto"):
        return _count_mergesort(x, y)
    raise DegenerateInput(f"unknown algorithm {algorithm!r}")


def _prepare(human, metric) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(human, dtype=np.float64).ravel()
    y = np.asarray(metric, dtype=np.float64).ravel()
    if x.size != y.size:
        raise LengthMismatch(f"lists have lengths {x.size} and {y.size}")
    if x.size < 2:
        raise DegenerateInput("need at least 2 observations")
    return x, y


def kendall_tau_b(human, metric, algorithm: str = "auto") -> TauReport:
    """Tau-b: (C - D) / sqrt((C + D + Tx) * (C + D + Ty)).

    Tx counts pairs tied only in the first list, Ty only in the second;
    pairs tied in both are excluded from all four terms. Raises
    DegenerateInput when either list is constant (zero denominator).
    """
    x, y = _prepare(human, metric)
    c = _pair_counts(x, y, algorithm)
    dx = c.concordant + c.discordant + c.ties_x_only
    dy = c.concordant + c.discordant + c.ties_y_only
    if dx == 0 or dy == 0:
        raise DegenerateInput("all values tied in one list; tau_b undefined")
    value = (c.concordant - c.discordant) / np.sqrt(float(dx) * float(dy))
    return TauReport(
        TAU_B, float(value), int(x.size),
        c.concordant, c.discordant, c.ties_x_only, c.ties_y_only,
    )


def kendall_tau_c(human, metric, algorithm: str = "auto") -> TauReport:
    """Tau-c (Stuart): 2m(C - D) / (n^2 (m - 1)), m = min distinct counts."""
    x, y = _prepare(human, metric)
    m = min(np.unique(x).size, np.unique(y).size)
    if m < 2:
        raise DegenerateInput("need at least 2 distinct values in each list")
    c = _pair_counts(x, y, algorithm)
    n = x.size
    value = 2.0 * m * (c.concordant - c.discordant) / (float(n) * n * (m - 1))
    return TauReport(
        TAU_C, float(value), int(n),
        c.concordant, c.discordant, c.ties_x_only, c.ties_y_only,
    )
