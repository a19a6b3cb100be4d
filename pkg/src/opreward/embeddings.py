"""Embedding providers, prompt-keyword masking, and similarity computation.

Two providers ship with the engine: a local JSONL vector store keyed by exact
text (hermetic tests, offline scoring) and an HTTP client speaking the
``POST /embed`` protocol of the embedding sidecar.  All vectors are
L2-normalized on the way out so cosine similarity reduces to a dot product.
"""

from __future__ import annotations

import json
import re
import string
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol, Sequence
from urllib.parse import urlsplit

import numpy as np
import requests


class EmbeddingError(Exception):
    """Base class for provider and embedding failures."""


class ProviderUnavailableError(EmbeddingError):
    """Remote provider could not be reached or answered with an error."""


class UnknownTextError(EmbeddingError):
    """Local vector store has no entry for the requested text."""


class DimensionMismatchError(EmbeddingError):
    """Provider returned vectors of inconsistent dimension."""


class EmbeddingProvider(Protocol):
    def fetch(self, texts: Sequence[str]) -> list[list[float]]:
        """Return one raw vector per text; normalization happens downstream."""
        ...


class LocalVectorStore:
    """Immutable text -> vector mapping loaded from JSONL.

    Each line is ``{"text": str, "vector": [float, ...]}``.  Duplicate texts:
    last one wins.
    """

    def __init__(self, mapping: dict[str, Sequence[float]]):
        self._mapping = {text: list(vec) for text, vec in mapping.items()}

    @classmethod
    def from_jsonl(cls, path) -> "LocalVectorStore":
        mapping: dict[str, Sequence[float]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                    mapping[row["text"]] = row["vector"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise EmbeddingError(f"{path}:{line_no}: bad store row: {exc}") from exc
        return cls(mapping)

    def __len__(self) -> int:
        return len(self._mapping)

    def __contains__(self, text: str) -> bool:
        return text in self._mapping

    def fetch(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            if text not in self._mapping:
                raise UnknownTextError(f"text not in vector store: {text!r}")
            vectors.append(list(self._mapping[text]))
        return vectors


class HttpEmbeddingProvider:
    """Client for the sidecar wire protocol: ``POST {base_url}/embed`` with
    ``{"texts": [...]}`` returning ``{"vectors": [[...]], "dim": int}``.

    Transport failures and 5xx responses are retried a bounded number of
    times, then surfaced as ProviderUnavailableError.
    """

    def __init__(self, base_url: str, timeout: float = 30.0, retries: int = 2,
                 backoff: float = 0.2, session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = session or requests.Session()

    @property
    def endpoint(self) -> str:
        if urlsplit(self.base_url).path.endswith("/embed"):
            return self.base_url
        return f"{self.base_url}/embed"

    def fetch(self, texts: Sequence[str]) -> list[list[float]]:
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.post(self.endpoint, json={"texts": list(texts)}, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
                continue
            if resp.status_code >= 500:
                last_error = ProviderUnavailableError(f"provider returned {resp.status_code}: {resp.text[:200]}")
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
                continue
            if resp.status_code != 200:
                raise ProviderUnavailableError(f"provider returned {resp.status_code}: {resp.text[:200]}")
            return self._parse(resp)
        raise ProviderUnavailableError(f"provider unreachable after {self.retries + 1} attempts: {last_error}")

    def _parse(self, resp: requests.Response) -> list[list[float]]:
        try:
            payload = resp.json()
            vectors = payload["vectors"]
            dim = int(payload["dim"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ProviderUnavailableError(f"malformed provider response: {exc}") from exc
        for vec in vectors:
            if len(vec) != dim:
                raise DimensionMismatchError(f"provider row has length {len(vec)}, declared dim {dim}")
        return [list(map(float, vec)) for vec in vectors]


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise EmbeddingError("cannot normalize a zero vector")
    return matrix / norms[:, None]


def embed(texts: Sequence[str], provider: EmbeddingProvider) -> np.ndarray:
    """Embed texts via the provider; returns an (n, d) float64 array with
    unit-norm rows.  Deterministic for a fixed provider state."""
    if not texts:
        raise ValueError("texts must be non-empty")
    for text in texts:
        if not isinstance(text, str) or not text:
            raise ValueError(f"texts must be non-empty strings, got {text!r}")
    vectors = provider.fetch(texts)
    if len(vectors) != len(texts):
        raise DimensionMismatchError(f"provider returned {len(vectors)} vectors for {len(texts)} texts")
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise DimensionMismatchError(f"inconsistent vector dimensions: {sorted(lengths)}")
    if 0 in lengths:
        raise DimensionMismatchError("provider returned empty vectors")
    matrix = np.asarray(vectors, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise EmbeddingError("provider returned non-finite values")
    return _normalize_rows(matrix)


def _load_default_stopwords() -> frozenset[str]:
    data = resources.files("opreward").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in data.splitlines() if w.strip())


DEFAULT_STOPWORDS = _load_default_stopwords()

_TOKEN_RE = re.compile(r"\S+")


def _normalize_token(token: str) -> str:
    return token.strip(string.punctuation).lower()


@dataclass(frozen=True)
class MaskingConfig:
    """Controls replacement of prompt keywords inside sentences before
    embedding, so shared prompt wording does not inflate similarity."""

    enabled: bool = True
    placeholder: str = "<X>"
    min_token_length: int = 4
    stopword_list: frozenset[str] = field(default_factory=lambda: DEFAULT_STOPWORDS)

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be >= 1")
        if self.placeholder in self.stopword_list:
            raise ValueError("placeholder must not appear in stopword_list")


def mask_prompt_keywords(prompt: str, sentences: Sequence[str], cfg: MaskingConfig) -> list[str]:
    """Replace prompt-derived keywords in each sentence with the placeholder.

    A whitespace token is masked when its punctuation-stripped lowercase form
    appears among the prompt's tokens, is at least ``min_token_length`` long,
    and is not a stopword.  Token counts and surrounding whitespace are
    preserved, and masking is idempotent (the placeholder itself never
    qualifies for masking).
    """
    if not cfg.enabled:
        return list(sentences)
    prompt_tokens = {_normalize_token(tok) for tok in prompt.split()}
    prompt_tokens.discard("")

    def should_mask(token: str) -> bool:
        norm = _normalize_token(token)
        return (
            len(norm) >= cfg.min_token_length
            and norm not in cfg.stopword_list
            and norm in prompt_tokens
        )

    masked = []
    for sentence in sentences:
        parts = []
        last = 0
        for m in _TOKEN_RE.finditer(sentence):
            parts.append(sentence[last:m.start()])
            token = m.group(0)
            parts.append(cfg.placeholder if should_mask(token) else token)
            last = m.end()
        parts.append(sentence[last:])
        masked.append("".join(parts))
    return masked


@dataclass(frozen=True)
class SimilarityMatrix:
    """Candidate-by-reference cosine similarities with identity metadata.

    Rejects NaN/inf at construction; values are clamped to [-1, 1] against
    rounding drift (anything further out of range is an error).
    """

    scores: np.ndarray
    candidate_ids: tuple
    reference_ids: tuple

    def __init__(self, scores, candidate_ids: Sequence, reference_ids: Sequence):
        arr = np.asarray(scores, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"similarity matrix must be 2-D, got shape {arr.shape}")
        if arr.shape[0] != len(candidate_ids) or arr.shape[1] != len(reference_ids):
            raise ValueError(
                f"shape {arr.shape} does not match {len(candidate_ids)} candidates x "
                f"{len(reference_ids)} references"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("similarity matrix contains NaN or infinite entries")
        if np.any(np.abs(arr) > 1.0 + 1e-6):
            raise ValueError("similarity values outside [-1, 1]")
        arr = np.clip(arr, -1.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "candidate_ids", tuple(candidate_ids))
        object.__setattr__(self, "reference_ids", tuple(reference_ids))

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape


def similarity_matrix(candidates: Sequence[str], references: Sequence[str], prompt: str,
                      cfg: MaskingConfig, provider: EmbeddingProvider) -> SimilarityMatrix:
    """Mask both sides against the prompt, embed, and take pairwise dot
    products of the unit vectors."""
    if not candidates or not references:
        raise ValueError("candidates and references must be non-empty")
    masked_candidates = mask_prompt_keywords(prompt, candidates, cfg)
    masked_references = mask_prompt_keywords(prompt, references, cfg)
    vectors = embed(list(masked_candidates) + list(masked_references), provider)
    cand_vecs = vectors[: len(candidates)]
    ref_vecs = vectors[len(candidates):]
    scores = np.clip(cand_vecs @ ref_vecs.T, -1.0, 1.0)
    return SimilarityMatrix(scores, tuple(candidates), tuple(references))


def op_mnrl_loss(anchors, positives, negatives_per_anchor, margin: float,
                 symmetric: bool = False) -> float:
    """Margin ranking loss over (anchor, positive, negatives) triplets.

    Per anchor i with negatives n_ij the contribution is
    ``max(0, margin + sim(a_i, n_ij) - sim(a_i, p_i))`` summed over j; the
    result is averaged over anchors.  With ``symmetric=True`` the variant
    that swaps anchor and positive roles is averaged in.  Inputs are
    normalized before similarity so magnitude never matters.
    """
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    anchor_arr = np.asarray(anchors, dtype=np.float64)
    positive_arr = np.asarray(positives, dtype=np.float64)
    if anchor_arr.ndim != 2 or anchor_arr.size == 0:
        raise ValueError("anchors must be a non-empty 2-D array")
    if anchor_arr.shape != positive_arr.shape:
        raise DimensionMismatchError(
            f"anchors shape {anchor_arr.shape} != positives shape {positive_arr.shape}"
        )
    if len(negatives_per_anchor) != anchor_arr.shape[0]:
        raise ValueError("need one negatives list per anchor")

    anchor_arr = _normalize_rows(anchor_arr)
    positive_arr = _normalize_rows(positive_arr)
    dim = anchor_arr.shape[1]

    total = 0.0
    total_sym = 0.0
    negative_count = 0
    for i in range(anchor_arr.shape[0]):
        negs = np.asarray(negatives_per_anchor[i], dtype=np.float64)
        if negs.size == 0:
            continue
        if negs.ndim != 2 or negs.shape[1] != dim:
            raise DimensionMismatchError(f"negatives for anchor {i} have shape {negs.shape}, want (*, {dim})")
        negs = _normalize_rows(negs)
        pos_sim = float(anchor_arr[i] @ positive_arr[i])
        total += float(np.maximum(0.0, margin + negs @ anchor_arr[i] - pos_sim).sum())
        if symmetric:
            total_sym += float(np.maximum(0.0, margin + negs @ positive_arr[i] - pos_sim).sum())
        negative_count += negs.shape[0]
    if negative_count == 0:
        raise ValueError("at least one anchor must have a negative")

    n_anchors = anchor_arr.shape[0]
    loss = total / n_anchors
    if symmetric:
        loss = 0.5 * (loss + total_sym / n_anchors)
    return loss
