import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opreward.embeddings import LocalVectorStore
from opreward.pipeline import Perspective, PerspectiveSet


def axis_vector(axis: int, dim: int, scale: float = 1.0) -> list[float]:
    vec = [0.0] * dim
    vec[axis] = scale
    return vec


def blend_vector(axis_main: int, axis_free: int, cosine: float, dim: int) -> list[float]:
    """Unit vector at an exact target cosine from basis axis ``axis_main``."""
    assert axis_main != axis_free, "need a private orthogonal axis"
    vec = [0.0] * dim
    vec[axis_main] = cosine
    vec[axis_free] = float(np.sqrt(1.0 - cosine * cosine))
    return vec


def store_from_gram(texts, gram) -> LocalVectorStore:
    """Build a store whose pairwise cosines reproduce a target Gram matrix
    (must be positive semi-definite) via Cholesky factorization."""
    arr = np.asarray(gram, dtype=np.float64)
    chol = np.linalg.cholesky(arr + 1e-12 * np.eye(arr.shape[0]))
    return LocalVectorStore({text: chol[i].tolist() for i, text in enumerate(texts)})


def make_perspective_set(row_id, prompt, entries) -> PerspectiveSet:
    perspectives = tuple(
        Perspective(name, explanation) if isinstance(name, str) else name
        for name, explanation in entries
    )
    return PerspectiveSet(row_id=row_id, prompt=prompt, perspectives=perspectives)


@pytest.fixture
def two_axis_store():
    return LocalVectorStore({"alpha view": [1.0, 0.0], "beta view": [0.0, 1.0]})
