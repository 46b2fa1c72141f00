"""Pure-Python implementations of the hot loops.

Every function here has a twin in ``_ckernels.pyx`` with the same signature
and bit-identical results. ``dualvad.kernels`` picks one at import time.
"""

from __future__ import annotations

import heapq
import math
from typing import Sequence

import numpy as np


def apportion(raw: Sequence[float], caps: Sequence[int], budget: int) -> list[int]:
    """Round real-valued targets to integers summing to ``budget``.

    Starts from ``min(max(floor(raw_i), 1), cap_i)`` and then repeatedly gives
    one unit to the uncapped entry with the largest ``raw_i - n_i`` (or takes
    one from the entry above 1 with the smallest ``raw_i - n_i``) until the sum
    matches. Ties go to the lowest index when adding and to the highest index
    when removing.

    Callers guarantee ``len(raw) <= budget <= sum(caps)`` and ``caps >= 1``.
    """
    m = len(raw)
    counts = [min(max(int(math.floor(raw[i])), 1), int(caps[i])) for i in range(m)]
    residual = budget - sum(counts)

    if residual > 0:
        heap = [(-(raw[i] - counts[i]), i) for i in range(m) if counts[i] < caps[i]]
        heapq.heapify(heap)
        while residual > 0:
            _, i = heapq.heappop(heap)
            counts[i] += 1
            residual -= 1
            if counts[i] < caps[i]:
                heapq.heappush(heap, (-(raw[i] - counts[i]), i))
    elif residual < 0:
        heap = [(raw[i] - counts[i], -i) for i in range(m) if counts[i] > 1]
        heapq.heapify(heap)
        while residual < 0:
            _, neg_i = heapq.heappop(heap)
            i = -neg_i
            counts[i] -= 1
            residual += 1
            if counts[i] > 1:
                heapq.heappush(heap, (raw[i] - counts[i], -i))
    return counts


def midrank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with midranks for tied scores.

    Returns NaN when either class is empty; the caller decides how to fail.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(scores, kind="mergesort")
    s = scores[order].tolist()
    y = labels[order].tolist()
    n = len(s)

    n_pos = 0
    rank_sum = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        # ranks i+1 .. j+1 share the midrank
        midrank = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            if y[k]:
                n_pos += 1
                rank_sum += midrank
        i = j + 1

    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (float(n_pos) * float(n_neg))


def count_in_intervals(frames: Sequence[int], intervals: Sequence[tuple[int, int]]) -> int:
    """Count sorted ``frames`` lying inside sorted, disjoint inclusive ``intervals``."""
    hits = 0
    j = 0
    n_iv = len(intervals)
    for f in frames:
        while j < n_iv and intervals[j][1] < f:
            j += 1
        if j == n_iv:
            break
        if intervals[j][0] <= f:
            hits += 1
    return hits
