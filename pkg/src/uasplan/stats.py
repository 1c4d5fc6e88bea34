"""Wilcoxon signed-rank test for paired samples.

Zero differences are dropped, absolute differences get midranks on ties, and
``W = min(W+, W-)``. For up to ``EXACT_MAX_N`` non-zero pairs the two-sided p
value is exact: ``2 * P(W+ <= W)`` under the null where every one of the
``2**n`` sign assignments is equally likely, capped at 1. The count of
assignments is obtained by a subset-sum recurrence over doubled ranks, which
tallies every assignment exactly without listing them one by one. Larger
samples use the normal approximation with continuity and tie corrections.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

__all__ = [
    "EXACT_MAX_N",
    "WilcoxonResult",
    "AllZeroDifferencesError",
    "midranks",
    "signed_rank_sums",
    "exact_null_counts",
    "wilcoxon_signed_rank",
    "read_pairs_csv",
]

EXACT_MAX_N = 25


class AllZeroDifferencesError(ValueError):
    """Every pair has a zero difference; the test is undefined."""


@dataclass(frozen=True)
class WilcoxonResult:
    w_statistic: float
    n_effective: int
    p_value: float
    method: str
    w_plus: float
    w_minus: float

    def to_dict(self) -> dict:
        return {"w": self.w_statistic, "n": self.n_effective, "p": self.p_value, "method": self.method}


def midranks(values) -> list[float]:
    """1-based ranks of ``values`` with tied entries sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def signed_rank_sums(pairs) -> tuple[float, float, list[float]]:
    diffs = [a - b for a, b in pairs]
    diffs = [d for d in diffs if d != 0]
    if not diffs:
        raise AllZeroDifferencesError("all paired differences are zero")
    ranks = midranks([abs(d) for d in diffs])
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    w_minus = sum(r for r, d in zip(ranks, diffs) if d < 0)
    return w_plus, w_minus, ranks


def exact_null_counts(ranks) -> list[int]:
    """``counts[s]`` = number of sign assignments whose positive-rank sum is ``s / 2``."""
    doubled = [int(round(2 * r)) for r in ranks]
    counts = [0] * (sum(doubled) + 1)
    counts[0] = 1
    top = 0
    for r in doubled:
        for s in range(top, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        top += r
    return counts


def wilcoxon_signed_rank(pairs) -> WilcoxonResult:
    pairs = [(float(a), float(b)) for a, b in pairs]
    if not pairs:
        raise ValueError("need at least one pair")
    w_plus, w_minus, ranks = signed_rank_sums(pairs)
    n = len(ranks)
    w = min(w_plus, w_minus)

    if n <= EXACT_MAX_N:
        counts = exact_null_counts(ranks)
        cutoff = int(round(2 * w))
        tail = sum(counts[: cutoff + 1])
        p = min(Fraction(2 * tail, 2**n), Fraction(1))
        return WilcoxonResult(w, n, float(p), "exact", w_plus, w_minus)

    mean = n * (n + 1) / 4
    tie_term = 0.0
    for r in set(ranks):
        t = ranks.count(r)
        if t > 1:
            tie_term += t**3 - t
    var = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48
    z = (w - mean + 0.5) / math.sqrt(var)
    p = min(1.0, math.erfc(-z / math.sqrt(2)))  # = 2 * Phi(z), z <= 0 here
    return WilcoxonResult(w, n, p, "normal-approx", w_plus, w_minus)


def read_pairs_csv(path) -> list[tuple[float, float]]:
    """Two numeric columns per row; a non-numeric first row is treated as a header."""
    pairs = []
    with open(Path(path), newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                if k == 0 or not pairs:
                    continue
                raise
            pairs.append((a, b))
    return pairs
