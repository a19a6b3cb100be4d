"""One-to-one candidate/reference matching over a similarity matrix.

``mbgm`` is the threshold-gated mutual-best greedy matcher: it repeatedly
accepts the globally best surviving entry (which is by construction the
maximum of its surviving row and column), then removes that row and column,
so no reference is ever matched twice.  ``naive_match`` is the per-row argmax
baseline it replaces; it is kept for comparison because it can assign several
candidates to one reference.

The greedy inner loop runs in a compiled extension when one was built; a
pure-numpy fallback is selected at import time (see ``MATCH_BACKEND`` and
``benchmarks/bench_matching.py`` for the speed comparison).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from opreward.embeddings import SimilarityMatrix

try:
    from opreward.matching._greedy import greedy_pairs as _greedy_pairs

    MATCH_BACKEND = "cython"
except ImportError:  # extension not built; numpy fallback
    from opreward.matching._greedy_py import greedy_pairs as _greedy_pairs

    MATCH_BACKEND = "python"

DEFAULT_TAU = 0.70


@dataclass(frozen=True)
class MatchResult:
    """Accepted one-to-one pairs plus the indices left unmatched on each side."""

    pairs: tuple[tuple[int, int, float], ...]
    unmatched_candidates: frozenset[int]
    unmatched_references: frozenset[int]
    threshold_used: float

    @property
    def matched_reference_indices(self) -> frozenset[int]:
        return frozenset(j for _, j, _ in self.pairs)


def _as_scores(matrix) -> np.ndarray:
    if isinstance(matrix, SimilarityMatrix):
        return matrix.scores
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"similarity matrix must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("similarity matrix contains NaN or infinite entries")
    return arr


def _validate(scores: np.ndarray, tau: float) -> None:
    if scores.shape[0] == 0 or scores.shape[1] == 0:
        raise ValueError("similarity matrix must be non-empty")
    if not (-1.0 <= tau <= 1.0):
        raise ValueError(f"tau must be in [-1, 1], got {tau}")


def mbgm(matrix, tau: float = DEFAULT_TAU) -> MatchResult:
    """Mutual-best greedy matching with threshold.

    Accepts a SimilarityMatrix or a raw 2-D array of candidate-by-reference
    scores.  Surplus rows or columns simply end up unmatched, so unequal
    candidate/reference counts need no special casing.
    """
    scores = _as_scores(matrix)
    _validate(scores, tau)
    # writable C-contiguous copy: the input may be a read-only view
    work = np.array(scores, dtype=np.float64, order="C", copy=True)
    raw_pairs = _greedy_pairs(work, float(tau))
    pairs = tuple((int(i), int(j), float(v)) for i, j, v in raw_pairs)
    matched_c = {i for i, _, _ in pairs}
    matched_r = {j for _, j, _ in pairs}
    return MatchResult(
        pairs=pairs,
        unmatched_candidates=frozenset(range(scores.shape[0])) - matched_c,
        unmatched_references=frozenset(range(scores.shape[1])) - matched_r,
        threshold_used=float(tau),
    )


def naive_match(matrix, tau: float = DEFAULT_TAU) -> list[tuple[int, int, float]]:
    """Per-row argmax baseline: each candidate independently picks its best
    reference (ties to the lowest reference index), kept if above threshold.
    Several candidates may land on the same reference."""
    scores = _as_scores(matrix)
    _validate(scores, tau)
    pairs = []
    best_cols = np.argmax(scores, axis=1)
    for i, j in enumerate(best_cols):
        value = float(scores[i, j])
        if value >= tau:
            pairs.append((int(i), int(j), value))
    return pairs
