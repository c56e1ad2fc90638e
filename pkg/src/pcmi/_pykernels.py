"""Pure-Python (numpy) implementations of the sampling hot loop.

Reference implementation for the Cython extension in ``_ckernels.pyx``; the
two must produce bit-identical results so sampling seeds are portable across
installs with and without the compiled core.
"""
from __future__ import annotations

import numpy as np


def mix_distribution(
    uni_probs: np.ndarray,
    bi_ids: np.ndarray,
    bi_counts: np.ndarray,
    bi_total: float,
    tri_ids: np.ndarray,
    tri_counts: np.ndarray,
    tri_total: float,
    lam3: float,
    lam2: float,
    lam1: float,
) -> np.ndarray:
    """Dense interpolated next-token distribution.

    Unavailable orders (zero context count) forfeit their weight to the
    unigram floor so the result always sums to 1.
    """
    w3 = lam3 if tri_total > 0 else 0.0
    w2 = lam2 if bi_total > 0 else 0.0
    w1 = 1.0 - w3 - w2
    probs = w1 * uni_probs
    if w2 > 0:
        probs[bi_ids] += (w2 / bi_total) * bi_counts
    if w3 > 0:
        probs[tri_ids] += (w3 / tri_total) * tri_counts
    return probs


def nucleus_pick(probs: np.ndarray, top_p: float, temperature: float, u: float) -> int:
    """Temperature-then-nucleus sampling; u is a uniform draw in [0, 1).

    Sorting is stable descending, so probability ties break by lowest token
    id. Keeps the minimal prefix with cumulative mass >= top_p.
    """
    if temperature != 1.0:
        q = probs ** (1.0 / temperature)
        q = q / q.sum()
    else:
        q = probs
    order = np.argsort(-q, kind="stable")
    sorted_q = q[order]
    cum = np.cumsum(sorted_q)
    cutoff = int(np.searchsorted(cum, top_p, side="left"))
    cutoff = min(cutoff, len(cum) - 1)
    kept = sorted_q[: cutoff + 1]
    target = u * float(kept.sum())
    acc = 0.0
    for j in range(cutoff + 1):
        acc += float(kept[j])
        if acc > target:
            return int(order[j])
    return int(order[cutoff])
