"""Ordered multiset of nonconformity scores with rank/select queries.

``ScoreTracker`` realizes the running empirical CDF of a score stream:
``rank_leq(x)`` counts stored scores <= x and ``select(r)`` returns the r-th
order statistic. Backed by a sorted container with logarithmic-ish inserts;
all calibration scores are stored exactly (no sketching), as the quantile
rules are stated for exact sample quantiles.

One writer per tracker; concurrent reads are fine between writes, and
distinct trackers are fully independent.
"""

from __future__ import annotations

import math
from typing import Iterator

from sortedcontainers import SortedList


class ScoreTracker:
    __slots__ = ("_scores",)

    def __init__(self, values=None) -> None:
        self._scores: SortedList = SortedList()
        if values is not None:
            for v in values:
                self.insert(v)

    @property
    def count(self) -> int:
        """Number of inserted scores."""
        return len(self._scores)

    def insert(self, score: float) -> None:
        """Add one score; duplicates accumulate with multiset semantics."""
        s = float(score)
        if not math.isfinite(s):
            raise ValueError(f"scores must be finite, got {score!r}")
        self._scores.add(s)

    def select(self, rank: int) -> float:
        """The rank-th smallest stored score, 1-based."""
        r = int(rank)
        if r != rank or not 1 <= r <= len(self._scores):
            raise IndexError(f"rank {rank!r} outside [1, {len(self._scores)}]")
        return self._scores[r - 1]

    def rank_leq(self, x: float) -> int:
        """Number of stored scores <= x."""
        if isinstance(x, float) and math.isnan(x):
            raise ValueError("rank_leq is undefined for NaN")
        return self._scores.bisect_right(x)

    def values(self) -> list[float]:
        """Stored scores in nondecreasing order (a copy)."""
        return list(self._scores)

    def __len__(self) -> int:
        return len(self._scores)

    def __iter__(self) -> Iterator[float]:
        return iter(self._scores)

    def __repr__(self) -> str:  # pragma: no cover
        return f"ScoreTracker(count={len(self._scores)})"
