"""Pure-numpy implementations of the quilting hot loops.

Mirror of the compiled extension module; ``quilting`` picks whichever is
available at import time. Both backends produce bitwise-identical results on
integer-valued inputs (uint8 pixels cast to float64), because every partial
sum stays below 2**53.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def overlap_ssd(pool, left, top, use_left, use_top, overlap):
    """Sum of squared differences between each pool patch and the placed L-shape.

    pool: (n, P, P, C) float64; left: (P, overlap, C); top: (overlap, P, C).
    The corner block is counted once (it belongs to the left strip; the top
    strip is scored from column ``overlap`` on when both strips are active).
    Returns (n,) float64 scores.
    """
    pool = np.asarray(pool)
    n = pool.shape[0]
    scores = np.zeros(n)
    if use_left:
        d = pool[:, :, :overlap, :] - left
        scores += np.einsum("nrck,nrck->n", d, d)
    if use_top:
        x0 = overlap if use_left else 0
        d = pool[:, :overlap, x0:, :] - top[:, x0:, :]
        scores += np.einsum("nrck,nrck->n", d, d)
    return scores


def seam_path(errors):
    """Minimum-cost monotone path down an error surface.

    errors: (h, w) float64. Returns (h,) int64, one column index per row;
    adjacent indices differ by at most 1. Among minimal-cost paths the
    lexicographically smallest index sequence is returned (ties always break
    toward the smaller column).
    """
    E = np.asarray(errors, dtype=np.float64)
    h, w = E.shape
    suffix = np.empty_like(E)
    suffix[h - 1] = E[h - 1]
    for i in range(h - 2, -1, -1):
        nxt = suffix[i + 1]
        m = nxt.copy()
        m[:-1] = np.minimum(m[:-1], nxt[1:])
        m[1:] = np.minimum(m[1:], nxt[:-1])
        suffix[i] = E[i] + m
    path = np.empty(h, dtype=np.int64)
    j = int(np.argmin(suffix[0]))  # first occurrence = smallest index
    path[0] = j
    for i in range(1, h):
        best = np.inf
        pick = j
        for nj in (j - 1, j, j + 1):
            if 0 <= nj < w and suffix[i, nj] < best:
                best = suffix[i, nj]
                pick = nj
        j = pick
        path[i] = j
    return path
