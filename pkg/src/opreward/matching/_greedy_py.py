"""Pure-numpy fallback for the greedy matching inner loop."""

from __future__ import annotations

import numpy as np


def greedy_pairs(scores: np.ndarray, tau: float) -> list[tuple[int, int, float]]:
    work = np.array(scores, dtype=np.float64, copy=True)
    work[work < tau] = -np.inf
    n_cols = work.shape[1]
    pairs: list[tuple[int, int, float]] = []
    while True:
        # argmax returns the first occurrence, i.e. lowest (i, j) row-major on ties
        i, j = divmod(int(np.argmax(work)), n_cols)
        value = work[i, j]
        if value == -np.inf:
            break
        pairs.append((i, j, float(value)))
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return pairs
