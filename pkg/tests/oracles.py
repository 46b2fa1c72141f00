"""Independent reference implementations used only by the tests.

None of these share code with the package: the allocation oracle enumerates
every feasible integer vector, the AUC oracle counts pairs, and the softmax
oracle evaluates in 50-digit arithmetic.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

TIE = 1e-9


def softmax_mp(scores, tau, dps=50):
    with mpmath.workdps(dps):
        e = [mpmath.exp(mpmath.mpf(s) / mpmath.mpf(tau)) for s in scores]
        z = mpmath.fsum(e)
        return [float(x / z) for x in e]


def softmax_plain(scores, tau):
    """Vectorised softmax without max-subtraction (a different route from the package)."""
    e = np.exp(np.asarray(scores, dtype=np.float64) / tau)
    return e / e.sum(axis=-1, keepdims=True)


@lru_cache(maxsize=None)
def bounded_compositions(total: int, caps: tuple[int, ...]) -> np.ndarray:
    """All integer vectors with ``1 <= n_i <= caps_i`` and ``sum == total``.

    Rows are sorted in descending lexicographic order.
    """
    rows: list[tuple[int, ...]] = []

    def extend(prefix: tuple[int, ...], i: int, left: int) -> None:
        if i == len(caps):
            if left == 0:
                rows.append(prefix)
            return
        rest = caps[i + 1 :]
        hi = min(caps[i], left - len(rest))
        lo = max(1, left - sum(rest))
        for v in range(hi, lo - 1, -1):
            extend(prefix + (v,), i + 1, left - v)

    extend((), 0, total)
    return np.array(rows, dtype=np.int64).reshape(-1, len(caps))


def allocation_oracle_batch(raw: np.ndarray, caps: tuple[int, ...], total: int) -> np.ndarray | None:
    """Exhaustive search for each row of ``raw``.

    Minimise the L1 distance to ``raw``; break L1 ties by L2 distance, then by
    the lexicographically largest vector (extra frames to lower indices).
    Returns ``None`` when no feasible vector exists.
    """
    cand = bounded_compositions(total, tuple(caps))
    if len(cand) == 0:
        return None
    out = np.empty((raw.shape[0], len(caps)), dtype=np.int64)
    step = max(1, 4_000_000 // (len(cand) * len(caps)))
    for lo in range(0, raw.shape[0], step):
        r = raw[lo : lo + step, None, :]
        diff = cand[None, :, :] - r
        l1 = np.abs(diff).sum(-1)
        l2 = (diff * diff).sum(-1)
        keep = l1 <= l1.min(axis=1, keepdims=True) + TIE
        l2 = np.where(keep, l2, np.inf)
        keep &= l2 <= l2.min(axis=1, keepdims=True) + TIE
        out[lo : lo + step] = cand[keep.argmax(axis=1)]
    return out


def allocation_oracle(raw, caps, total):
    res = allocation_oracle_batch(np.asarray([raw], dtype=np.float64), tuple(caps), total)
    return None if res is None else res[0].tolist()


def pairwise_auc(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def round_half_up_spacing(start, end, count):
    """Evenly spaced picks via Fraction arithmetic and explicit half-up rounding."""
    if count == 1:
        return [(start + end) // 2]
    length = end - start + 1
    out = []
    for k in range(count):
        x = Fraction(k * (length - 1), count - 1)
        fl = x.numerator // x.denominator
        out.append(start + (fl + 1 if x - fl >= Fraction(1, 2) else fl))
    return out
