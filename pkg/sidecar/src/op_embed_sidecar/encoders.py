"""Sentence encoders behind a single ``encode(texts) -> (n, d) array`` call.

The default backend wraps a pretrained sentence-transformers model.  The
hashing backend is a deterministic bag-of-words random projection that needs
no model download; it keeps word-overlap structure (paraphrases sharing
content words land close), which is all the offline tests need.
"""

from __future__ import annotations

import hashlib
import string
from typing import Sequence

import numpy as np

DEFAULT_MODEL = "sentence-transformers/paraphrase-mpnet-base-v2"


class HashEncoder:
    """Mean of per-token pseudo-random unit vectors, seeded from a token
    hash: bitwise-stable across processes and platforms."""

    def __init__(self, dim: int = 384):
        if dim < 8:
            raise ValueError("dim must be at least 8")
        self.dim = dim
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        digest = hashlib.sha256(token.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "little")
        vec = np.random.default_rng(seed).standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        self._token_cache[token] = vec
        return vec

    def _tokens(self, text: str) -> list[str]:
        tokens = [t.strip(string.punctuation).lower() for t in text.split()]
        return [t for t in tokens if t]

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim))
        for i, text in enumerate(texts):
            tokens = self._tokens(text)
            if not tokens:
                # degenerate text: derive a vector from the raw string so the
                # service never returns a zero vector
                out[i] = self._token_vector(f"\x00raw:{text}")
            else:
                out[i] = np.mean([self._token_vector(t) for t in tokens], axis=0)
        return out


class SbertEncoder:
    """Pretrained sentence-transformers backend; loaded lazily so importing
    this module never touches model weights."""

    def __init__(self, model_identifier: str = DEFAULT_MODEL, device: str = "cpu"):
        self.model_identifier = model_identifier
        self.device = device
        self._model = None

    def _load(self):
        if self._model is None:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(self.model_identifier, device=self.device)
        return self._model

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        model = self._load()
        return np.asarray(model.encode(
            list(texts), convert_to_numpy=True, normalize_embeddings=False,
            show_progress_bar=False,
        ), dtype=np.float64)


def build_encoder(backend: str, model_identifier: str = DEFAULT_MODEL,
                  device: str = "cpu", hash_dim: int = 384):
    if backend == "sbert":
        return SbertEncoder(model_identifier, device)
    if backend == "hash":
        return HashEncoder(dim=hash_dim)
    raise ValueError(f"unknown encoder backend: {backend!r}")
