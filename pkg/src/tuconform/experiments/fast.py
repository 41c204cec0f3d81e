"""Compiled inner loops for running order statistics.

The Monte Carlo studies need, for every step t, the rank_t-th smallest of
the first t scores. Offline that is a Fenwick tree over the value order:
argsort the whole stream once, insert arrival positions one at a time, and
answer k-th-element queries by binary descent. The jitted kernel handles a
whole replication (all methods at once) in one pass.

The reference implementation remains ``SequentialCalibrator`` /
``EpochEngine``; equivalence of this path is pinned by tests.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _running_select(pos: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    """Value-order indices of per-step order statistics.

    pos[t] is the slot of arrival t in the fully sorted stream; ranks[m, t]
    is the wanted rank at step t for method m, with values < 1 marking an
    infinite threshold. Returns idx[m, t] into the sorted array, -1 where
    infinite.
    """
    H = pos.shape[0]
    M = ranks.shape[0]
    size = 1
    levels = 0
    while size < H:
        size <<= 1
        levels += 1
    tree = np.zeros(size + 1, dtype=np.int64)
    out = np.full((M, H), -1, dtype=np.int64)
    for t in range(H):
        i = pos[t] + 1
        while i <= size:
            tree[i] += 1
            i += i & (-i)
        for m in range(M):
            r = ranks[m, t]
            if r >= 1:
                node = 0
                rem = r
                bit = size
                while bit > 0:
                    nxt = node + bit
                    if nxt <= size and tree[nxt] < rem:
                        node = nxt
                        rem -= tree[nxt]
                    bit >>= 1
                out[m, t] = node
    return out


def running_thresholds(scores: np.ndarray, ranks: np.ndarray) -> np.ndarray:
    """Per-step thresholds for one stream under one or more rank series.

    ``scores`` has shape (H,); ``ranks`` has shape (H,) or (M, H) with -1
    marking steps whose threshold is infinite. Returns thresholds of the
    same leading shape, +inf where infinite.
    """
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    rk = np.asarray(ranks, dtype=np.int64)
    squeeze = rk.ndim == 1
    if squeeze:
        rk = rk[None, :]
    H = scores.shape[0]
    if rk.shape[1] != H:
        raise ValueError(f"rank series length {rk.shape[1]} != stream length {H}")
    order = np.argsort(scores, kind="stable")
    sorted_vals = scores[order]
    pos = np.empty(H, dtype=np.int64)
    pos[order] = np.arange(H, dtype=np.int64)
    idx = _running_select(pos, np.ascontiguousarray(rk))
    out = np.full(rk.shape, math.inf, dtype=np.float64)
    hit = idx >= 0
    out[hit] = sorted_vals[idx[hit]]
    return out[0] if squeeze else out
