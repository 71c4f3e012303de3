"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled extension (Cython) is selected at import time when present;
otherwise the numpy/pure-Python fallback is used. Both expose the same
functions and return identical results, so everything above this layer is
backend-agnostic. Set AUDIORANK_PURE_PYTHON=1 to force the fallback.
"""

import os

import numpy as np

from audiorank.kernels import _fallback

if os.environ.get("AUDIORANK_PURE_PYTHON") == "1":
    _impl = _fallback
else:
    try:
        from audiorank.kernels import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

KERNEL_BACKEND = "native" if _impl is not _fallback else "fallback"


def topk_from_scores(scores, k: int) -> np.ndarray:
    """Indices of the k largest scores, score descending, ties by index ascending."""
    arr = np.ascontiguousarray(scores, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d score array, got shape {arr.shape}")
    return _impl.topk_from_scores(arr, int(k))


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two token-id sequences."""
    xs = np.ascontiguousarray(a, dtype=np.int64)
    ys = np.ascontiguousarray(b, dtype=np.int64)
    return int(_impl.lcs_length(xs, ys))
