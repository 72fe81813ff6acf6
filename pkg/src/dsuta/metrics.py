from __future__ import annotations

from typing import Sequence

import numpy as np


def edit_distance(hyp: Sequence, ref: Sequence) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    prev = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, 1):
        cur = [i] + [0] * len(ref)
        for j, r in enumerate(ref, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (h != r))
        prev = cur
    return prev[-1]


def token_error_rate(hyp: Sequence, ref: Sequence) -> float:
    """Edit distance over reference length; NaN marks an empty reference."""
    if len(ref) == 0:
        return float("nan")
    return edit_distance(hyp, ref) / len(ref)


def smooth_curve(values: Sequence[float], window: int) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` points average the prefix."""
    if window < 1:
        raise ValueError("window must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    c = np.concatenate([[0.0], np.cumsum(v)])
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)
