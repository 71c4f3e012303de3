"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled extension is unavailable. Both implementations
produce identical results on identical inputs; only speed differs.
"""

import numpy as np


def topk_from_scores(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ordered by score descending.

    Ties are broken by ascending index, so the result is fully
    deterministic for any input.
    """
    n = scores.shape[0]
    k = min(k, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    # lexsort sorts by the last key first: primary -score, secondary index.
    order = np.lexsort((np.arange(n), -scores))
    return np.ascontiguousarray(order[:k], dtype=np.int64)


def lcs_length(a: np.ndarray, b: np.ndarray) -> int:
    """Length of the longest common subsequence of two token-id sequences."""
    xs = a.tolist()
    ys = b.tolist()
    if not xs or not ys:
        return 0
    if len(ys) > len(xs):
        xs, ys = ys, xs
    prev = [0] * (len(ys) + 1)
    for x in xs:
        curr = [0]
        row = prev
        append = curr.append
        for j, y in enumerate(ys, 1):
            if x == y:
                append(row[j - 1] + 1)
            else:
                left = curr[j - 1]
                up = row[j]
                append(up if up >= left else left)
        prev = curr
    return prev[-1]
