"""Kendall tau-b rank correlation with tie correction and asymptotic p-values.

Concordant/discordant pair counts are accumulated as exact integers (merge
counting on top of numpy searchsorted), so the statistic is bit-identical to
a brute-force O(n^2) concordance count while scaling to millions of pairs.
The p-value uses the normal approximation of the tau-b statistic with the
standard tie-corrected variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError

SIGNIFICANCE_LEVELS = (0.05, 0.01, 0.001)


def significance_stars(p_value: float) -> str:
    """Asterisk marker for significance at 0.05 / 0.01 / 0.001."""
    if math.isnan(p_value):
        return ""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class CorrelationResult:
    """Rank-correlation outcome; ``tau`` and ``p_value`` are NaN when undefined."""

    tau: float
    p_value: float
    n: int
    stars: str

    @property
    def is_na(self) -> bool:
        return math.isnan(self.tau)

    @classmethod
    def undefined(cls, n: int) -> "CorrelationResult":
        return cls(tau=math.nan, p_value=math.nan, n=n, stars="")


def _tie_sums(values: np.ndarray) -> tuple[int, int, int]:
    """(sum t(t-1)/2, sum t(t-1)(2t+5), sum t(t-1)(t-2)) over tie groups."""
    _, counts = np.unique(values, return_counts=True)
    t = counts[counts > 1].astype(np.int64)
    if t.size == 0:
        return 0, 0, 0
    pairs = int(np.sum(t * (t - 1)) // 2)
    v = int(np.sum(t * (t - 1) * (2 * t + 5)))
    triple = int(np.sum(t * (t - 1) * (t - 2)))
    return pairs, v, triple


def _count_inversions(values: np.ndarray) -> int:
    """Exact count of pairs (i < j) with values[i] > values[j]."""
    a = np.array(values, dtype=np.float64, copy=True)
    n = len(a)
    inversions = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = lo + width
            hi = min(lo + 2 * width, n)
            if mid >= hi:
                continue
            left = a[lo:mid]
            right = a[mid:hi]
            # left and right are each sorted; count left_i > right_j pairs.
            positions = np.searchsorted(left, right, side="right")
            inversions += int(len(left) * len(right) - int(positions.sum()))
            a[lo:hi] = np.sort(a[lo:hi], kind="stable")
        width *= 2
    return inversions


def kendall_tau_b(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Tau-b between two equal-length value sequences.

    Raises :class:`DegenerateInputError` when fewer than two observations
    are given or either side is constant (tau undefined; callers that must
    keep going report the result as NA).
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise DegenerateInputError("inputs must be two equal-length 1-d sequences")
    n = len(x)
    if n < 2:
        raise DegenerateInputError(f"need at least 2 observations, got {n}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInputError("inputs contain non-finite values")
    if np.all(x == x[0]):
        raise DegenerateInputError("first sequence is constant; tau is undefined")
    if np.all(y == y[0]):
        raise DegenerateInputError("second sequence is constant; tau is undefined")

    order = np.lexsort((y, x))
    x_sorted = x[order]
    y_sorted = y[order]

    n0 = n * (n - 1) // 2
    n1, vt, t_triple = _tie_sums(x)
    n2, vu, u_triple = _tie_sums(y)

    # Joint ties: run lengths over the lexicographically sorted pairs.
    same = (x_sorted[1:] == x_sorted[:-1]) & (y_sorted[1:] == y_sorted[:-1])
    starts = np.flatnonzero(np.concatenate(([True], ~same)))
    lengths = np.diff(np.append(starts, n)).astype(np.int64)
    n3 = int(np.sum(lengths * (lengths - 1) // 2))

    # After sorting by (x, y), inversions in y are exactly the discordant pairs.
    discordant = _count_inversions(y_sorted)
    concordant = n0 - n1 - n2 + n3 - discordant

    tau = (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))

    # Tie-corrected variance of (concordant - discordant); normal approximation.
    v0 = n * (n - 1) * (2 * n + 5)
    variance = (v0 - vt - vu) / 18.0
    variance += (2 * n1) * (2 * n2) / (2.0 * n * (n - 1))
    if n > 2:
        variance += t_triple * u_triple / (9.0 * n * (n - 1) * (n - 2))
    if variance <= 0:
        p_value = math.nan
    else:
        z = (concordant - discordant) / math.sqrt(variance)
        p_value = math.erfc(abs(z) / math.sqrt(2.0))

    return CorrelationResult(tau=tau, p_value=p_value, n=n, stars=significance_stars(p_value))
