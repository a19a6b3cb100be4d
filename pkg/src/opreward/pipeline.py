"""Dataset refinement, triplet construction, and the pluggable LLM judge.

The refinement pass runs three stages per row: embedding-similarity
filtering flags candidate duplicate pairs, a majority-voting LLM judge
confirms them, and short rows are either dropped or topped up with generated
perspectives.  Triplet construction reuses the same judge to pick, for each
anchor explanation, the first redundant neighbor (positive) and the first
distinct one (negative) in similarity rank order.

Judge calls go through the ``LLMClient`` protocol; a replay client backed by
a JSONL transcript makes every pipeline run reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol, Sequence

import numpy as np
import requests

from opreward.embeddings import EmbeddingProvider, embed
from opreward.formatting import collapse_whitespace, normalize_text, parse_perspective_line

logger = logging.getLogger(__name__)

MIN_PERSPECTIVES = 5
STAGE1_THRESHOLD = 0.65
JUDGE_VOTES = 3

PROVENANCE_ORIGINAL = "original"
PROVENANCE_AUGMENTED = "augmented"


class JudgeError(Exception):
    """A judge call failed for a specific pair after bounded retries."""


def normalize_explanation(text: str) -> str:
    return collapse_whitespace(normalize_text(text)).casefold()


@dataclass(frozen=True)
class Perspective:
    name: str
    explanation: str
    provenance: str = PROVENANCE_ORIGINAL

    def __post_init__(self):
        if self.provenance not in (PROVENANCE_ORIGINAL, PROVENANCE_AUGMENTED):
            raise ValueError(f"bad provenance: {self.provenance!r}")

    def render(self) -> str:
        return f"In the perspective of {self.name}, {self.explanation}"


@dataclass(frozen=True)
class PerspectiveSet:
    """A prompt plus its ordered, named perspectives (either side of a match)."""

    row_id: str
    prompt: str
    perspectives: tuple[Perspective, ...]

    @property
    def explanations(self) -> list[str]:
        return [p.explanation for p in self.perspectives]

    def __len__(self) -> int:
        return len(self.perspectives)


def validate_refined(pset: PerspectiveSet) -> None:
    """Check the post-refinement contract: at least five perspectives and no
    two with identical normalized explanations."""
    if len(pset) < MIN_PERSPECTIVES:
        raise ValueError(f"row {pset.row_id}: {len(pset)} perspectives, need >= {MIN_PERSPECTIVES}")
    seen: dict[str, str] = {}
    for p in pset.perspectives:
        key = normalize_explanation(p.explanation)
        if key in seen:
            raise ValueError(f"row {pset.row_id}: duplicate explanation {p.explanation!r}")
        seen[key] = p.explanation


@dataclass(frozen=True)
class Triplet:
    row_id: str
    prompt: str
    anchor: str
    positive: str
    negative: str

    def __post_init__(self):
        keys = {normalize_explanation(t) for t in (self.anchor, self.positive, self.negative)}
        if len(keys) != 3:
            raise ValueError("anchor, positive, and negative must be pairwise distinct")


@dataclass(frozen=True)
class JudgeVerdict:
    pair: tuple[str, str]
    votes: tuple[bool, bool, bool]
    is_duplicate: bool
    index_pair: tuple[int, int] | None = None

    def __post_init__(self):
        if self.is_duplicate != (sum(self.votes) >= 2):
            raise ValueError("is_duplicate must reflect the 2-of-3 majority of votes")


@dataclass(frozen=True)
class AugmentationPlan:
    action: str  # "drop" | "augment" | "keep"
    augment_count: int = 0
    prompt: str | None = None


class LLMClient(Protocol):
    def complete(self, prompt: str) -> str:
        ...


def _load_template(name: str) -> str:
    return resources.files("opreward").joinpath(f"templates/{name}").read_text(encoding="utf-8")


JUDGE_PAIR_TEMPLATE = _load_template("judge_pair.txt")
AUGMENTATION_TEMPLATE = _load_template("augment_perspectives.txt")
MATCH_EVAL_TEMPLATE = _load_template("match_eval.txt")
QUALITY_EVAL_TEMPLATE = _load_template("quality_eval.txt")


def render_judge_prompt(s1: str, s2: str) -> str:
    return JUDGE_PAIR_TEMPLATE.format(s1=s1, s2=s2)


def render_augmentation_prompt(pset: PerspectiveSet, missing_count: int) -> str:
    existing = "\n".join(p.render() for p in pset.perspectives)
    return AUGMENTATION_TEMPLATE.format(
        topic=pset.prompt,
        existing_count=len(pset),
        existing_perspectives=existing,
        missing_count=missing_count,
    )


_JUDGE_PROMPT_RE = re.compile(
    r"=== Sentence A: ===\n(?P<a>.*?)\n\n=== Sentence B: ===\n(?P<b>.*?)\n\nYour Answer:",
    re.DOTALL,
)


def parse_judge_prompt(prompt: str) -> tuple[str, str] | None:
    m = _JUDGE_PROMPT_RE.search(prompt)
    if m is None:
        return None
    return m.group("a"), m.group("b")


def pair_hash(s1: str, s2: str) -> str:
    payload = f"{normalize_text(s1)}\x1f{normalize_text(s2)}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def parse_vote(reply: str, pair: tuple[str, str] | None = None) -> bool:
    """Case-insensitive prefix match on yes/no; anything else counts as a No
    vote (fail-safe toward keeping data) and is logged."""
    trimmed = reply.strip().lower()
    if trimmed.startswith("yes"):
        return True
    if not trimmed.startswith("no"):
        logger.warning("unparseable judge reply %r for pair %r; counting as No", reply[:80], pair)
    return False


class HttpChatClient:
    """Generic chat-completions client; endpoint and model are opaque strings."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 timeout: float = 60.0, session: requests.Session | None = None):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self._session = session or requests.Session()

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        resp = self._session.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        resp.raise_for_status()
        body = resp.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise JudgeError(f"malformed chat completion response: {exc}") from exc


class ReplayJudgeClient:
    """Serves judge votes from a recorded transcript instead of a live model.

    Transcript rows are ``{"pair_hash": str, "votes": ["Yes"|"No", x3]}``;
    votes for repeated hashes are consumed in file order.
    """

    def __init__(self, rows: Sequence[dict]):
        self._queues: dict[str, list[str]] = {}
        for row in rows:
            self._queues.setdefault(row["pair_hash"], []).extend(row["votes"])

    @classmethod
    def from_jsonl(cls, path) -> "ReplayJudgeClient":
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return cls(rows)

    def complete(self, prompt: str) -> str:
        pair = parse_judge_prompt(prompt)
        if pair is None:
            raise JudgeError("replay client only answers judge-pair prompts")
        key = pair_hash(*pair)
        queue = self._queues.get(key)
        if not queue:
            raise JudgeError(f"transcript exhausted for pair hash {key[:12]}")
        return queue.pop(0)


class RecordingJudgeClient:
    """Wraps a live client and appends a transcript row after every third
    vote for a pair, producing the replay format."""

    def __init__(self, inner: LLMClient, path):
        self._inner = inner
        self._path = path
        self._pending: dict[str, list[str]] = {}

    def complete(self, prompt: str) -> str:
        reply = self._inner.complete(prompt)
        pair = parse_judge_prompt(prompt)
        if pair is not None:
            key = pair_hash(*pair)
            votes = self._pending.setdefault(key, [])
            votes.append("Yes" if parse_vote(reply, pair) else "No")
            if len(votes) == JUDGE_VOTES:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"pair_hash": key, "votes": votes}, sort_keys=True) + "\n")
                del self._pending[key]
        return reply


def _call_judge(judge: LLMClient, prompt: str, pair: tuple[str, str], retries: int) -> str:
    last: Exception | None = None
    for attempt in range(retries + 1):
        try:
            return judge.complete(prompt)
        except Exception as exc:  # transport or client failure
            last = exc
            if attempt < retries:
                time.sleep(0.05 * (attempt + 1))
    raise JudgeError(f"judge failed for pair {pair!r} after {retries + 1} attempts: {last}") from last


def judge_votes(s1: str, s2: str, judge: LLMClient, retries: int = 2) -> tuple[bool, bool, bool]:
    prompt = render_judge_prompt(s1, s2)
    votes = tuple(parse_vote(_call_judge(judge, prompt, (s1, s2), retries), (s1, s2))
                  for _ in range(JUDGE_VOTES))
    return votes  # type: ignore[return-value]


def stage1_candidate_pairs(pset: PerspectiveSet, provider: EmbeddingProvider,
                           threshold: float = STAGE1_THRESHOLD) -> list[tuple[tuple[int, int], float]]:
    """All explanation pairs at or above the similarity threshold, ascending
    by index pair.  This is the coarse first-layer duplicate filter."""
    if len(pset) < 2:
        raise ValueError("need at least two perspectives to form pairs")
    vectors = embed(pset.explanations, provider)
    sims = np.clip(vectors @ vectors.T, -1.0, 1.0)
    out = []
    n = len(pset)
    for i in range(n):
        for j in range(i + 1, n):
            score = float(sims[i, j])
            if score >= threshold:
                out.append(((i, j), score))
    return out


def stage2_judge_pairs(pairs: Sequence[tuple[str, str]], judge: LLMClient,
                       index_pairs: Sequence[tuple[int, int]] | None = None,
                       retries: int = 2) -> list[JudgeVerdict]:
    """Three judge votes per flagged pair; 2-of-3 yes votes confirm a duplicate."""
    if index_pairs is not None and len(index_pairs) != len(pairs):
        raise ValueError("index_pairs must parallel pairs")
    verdicts = []
    for k, (s1, s2) in enumerate(pairs):
        votes = judge_votes(s1, s2, judge, retries=retries)
        verdicts.append(JudgeVerdict(
            pair=(s1, s2),
            votes=votes,
            is_duplicate=sum(votes) >= 2,
            index_pair=tuple(index_pairs[k]) if index_pairs is not None else None,
        ))
    return verdicts


def apply_dedup(pset: PerspectiveSet, verdicts: Sequence[JudgeVerdict]) -> PerspectiveSet:
    """Remove the higher-index member of each confirmed duplicate pair.

    Pairs are processed in ascending index order and removals cascade: once
    an index is gone, its remaining pairs are moot.
    """
    duplicate_pairs = []
    for v in verdicts:
        if not v.is_duplicate:
            continue
        if v.index_pair is None:
            raise ValueError("verdicts must carry index pairs for dedup")
        i, j = v.index_pair
        duplicate_pairs.append((min(i, j), max(i, j)))
    removed: set[int] = set()
    for i, j in sorted(set(duplicate_pairs)):
        if i in removed or j in removed:
            continue
        removed.add(j)
    kept = tuple(p for idx, p in enumerate(pset.perspectives) if idx not in removed)
    return PerspectiveSet(row_id=pset.row_id, prompt=pset.prompt, perspectives=kept)


def stage3_plan_augmentation(pset: PerspectiveSet) -> AugmentationPlan:
    """Rows with <= 2 perspectives are dropped, 3-4 get an augmentation prompt
    for the missing count, and rows already at five or more are kept."""
    n = len(pset)
    if n <= 2:
        return AugmentationPlan(action="drop")
    if n < MIN_PERSPECTIVES:
        missing = MIN_PERSPECTIVES - n
        return AugmentationPlan(
            action="augment",
            augment_count=missing,
            prompt=render_augmentation_prompt(pset, missing),
        )
    return AugmentationPlan(action="keep")


def ingest_augmentation(pset: PerspectiveSet, reply: str, count: int) -> PerspectiveSet:
    """Validate generated lines against the perspective template and append up
    to ``count`` new, non-duplicate perspectives tagged as augmented."""
    existing = {normalize_explanation(p.explanation) for p in pset.perspectives}
    added: list[Perspective] = []
    for line in reply.splitlines():
        if len(added) >= count:
            break
        if not line.strip():
            continue
        parsed = parse_perspective_line(line)
        if parsed is None:
            continue
        key = normalize_explanation(parsed.explanation)
        if key in existing:
            continue
        existing.add(key)
        added.append(Perspective(parsed.name, parsed.explanation, PROVENANCE_AUGMENTED))
    return PerspectiveSet(
        row_id=pset.row_id,
        prompt=pset.prompt,
        perspectives=pset.perspectives + tuple(added),
    )


def dedup_row(pset: PerspectiveSet, provider: EmbeddingProvider, judge: LLMClient,
              threshold: float = STAGE1_THRESHOLD, retries: int = 2) -> PerspectiveSet:
    """Stage 1 + stage 2 + removal for one row."""
    if len(pset) < 2:
        return pset
    flagged = stage1_candidate_pairs(pset, provider, threshold)
    if not flagged:
        return pset
    explanations = pset.explanations
    text_pairs = [(explanations[i], explanations[j]) for (i, j), _ in flagged]
    verdicts = stage2_judge_pairs(text_pairs, judge, index_pairs=[p for p, _ in flagged], retries=retries)
    return apply_dedup(pset, verdicts)


@dataclass
class RefineOutcome:
    rows: list[PerspectiveSet]
    input_count: int = 0
    kept: int = 0
    dropped: int = 0
    augmented: int = 0
    augment_pending: int = 0
    augment_shortfall: int = 0

    @property
    def counts(self) -> dict[str, int]:
        return {
            "input": self.input_count,
            "kept": self.kept,
            "dropped": self.dropped,
            "augmented": self.augmented,
            "augment_pending": self.augment_pending,
            "augment_shortfall": self.augment_shortfall,
        }


def refine_dataset(rows: Sequence[PerspectiveSet], provider: EmbeddingProvider, judge: LLMClient,
                   augmenter: LLMClient | None = None, threshold: float = STAGE1_THRESHOLD,
                   retries: int = 2) -> RefineOutcome:
    """Full refinement pass.  Every input row lands in exactly one of the
    kept/dropped/augmented buckets; rows needing augmentation without an
    augmenter are emitted unchanged and counted as pending."""
    outcome = RefineOutcome(rows=[], input_count=len(rows))
    for row in rows:
        deduped = dedup_row(row, provider, judge, threshold, retries)
        plan = stage3_plan_augmentation(deduped)
        if plan.action == "drop":
            outcome.dropped += 1
            continue
        if plan.action == "keep":
            outcome.kept += 1
            outcome.rows.append(deduped)
            continue
        outcome.augmented += 1
        if augmenter is None:
            outcome.augment_pending += 1
            outcome.rows.append(deduped)
            continue
        reply = augmenter.complete(plan.prompt or "")
        expanded = ingest_augmentation(deduped, reply, plan.augment_count)
        if len(expanded) < MIN_PERSPECTIVES:
            outcome.augment_shortfall += 1
        outcome.rows.append(expanded)
    return outcome


def build_triplets(pset: PerspectiveSet, judge: LLMClient, provider: EmbeddingProvider,
                   retries: int = 2) -> list[Triplet]:
    """For each anchor, walk the remaining explanations in descending base
    similarity; the first judged-redundant one becomes the positive and the
    first judged-distinct one the negative.  Anchors missing either role are
    skipped."""
    n = len(pset)
    if n < 3:
        raise ValueError("need at least three perspectives to build triplets")
    explanations = pset.explanations
    vectors = embed(explanations, provider)
    sims = np.clip(vectors @ vectors.T, -1.0, 1.0)

    triplets = []
    for i in range(n):
        anchor = explanations[i]
        anchor_key = normalize_explanation(anchor)
        ranked = sorted((j for j in range(n) if j != i), key=lambda j: (-sims[i, j], j))
        positive: str | None = None
        negative: str | None = None
        for j in ranked:
            if positive is not None and negative is not None:
                break
            candidate = explanations[j]
            if normalize_explanation(candidate) == anchor_key:
                continue
            is_dup = sum(judge_votes(anchor, candidate, judge, retries=retries)) >= 2
            if is_dup and positive is None:
                positive = candidate
            elif not is_dup and negative is None:
                negative = candidate
        if positive is None or negative is None:
            continue
        if normalize_explanation(positive) == normalize_explanation(negative):
            continue
        triplets.append(Triplet(
            row_id=pset.row_id, prompt=pset.prompt,
            anchor=anchor, positive=positive, negative=negative,
        ))
    return triplets


def uniqueness_score(pset: PerspectiveSet, provider: EmbeddingProvider, judge: LLMClient,
                     tau: float = STAGE1_THRESHOLD, retries: int = 2) -> float:
    """Fraction of perspectives surviving the similarity + judge filter;
    1.0 means no confirmed redundancy."""
    n = len(pset)
    if n == 0:
        raise ValueError("empty perspective set")
    if n == 1:
        return 1.0
    deduped = dedup_row(pset, provider, judge, tau, retries)
    removed = n - len(deduped)
    return (n - removed) / n


# --- JSONL formats -----------------------------------------------------------

def perspective_set_to_row(pset: PerspectiveSet) -> dict:
    return {
        "id": pset.row_id,
        "prompt": pset.prompt,
        "perspectives": [
            {"name": p.name, "explanation": p.explanation, "provenance": p.provenance}
            for p in pset.perspectives
        ],
    }


def perspective_set_from_row(row: dict) -> PerspectiveSet:
    perspectives = tuple(
        Perspective(
            name=p["name"],
            explanation=p["explanation"],
            provenance=p.get("provenance", PROVENANCE_ORIGINAL),
        )
        for p in row["perspectives"]
    )
    return PerspectiveSet(row_id=str(row["id"]), prompt=row["prompt"], perspectives=perspectives)


def load_dataset_jsonl(path) -> list[PerspectiveSet]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(perspective_set_from_row(json.loads(line)))
    return rows


def triplet_to_row(t: Triplet) -> dict:
    return {
        "row_id": t.row_id,
        "prompt": t.prompt,
        "anchor": t.anchor,
        "positive": t.positive,
        "negative": t.negative,
    }
