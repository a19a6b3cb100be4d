"""Per-response reward computation: coverage, uniqueness, format, and the
ladder-scaled final scalar handed to the policy optimizer.

Coverage is the fraction of reference perspectives claimed by the one-to-one
greedy matcher; uniqueness is the ratio of semantic clusters (connected
components of the above-threshold similarity graph) to candidate count; both
rates are mapped through capped stepwise tables before summing with the
format reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from opreward.embeddings import EmbeddingProvider, MaskingConfig, embed, mask_prompt_keywords, similarity_matrix
from opreward.formatting import FormatReward, ParsedResponse, format_reward, parse_response
from opreward.matching import MatchResult, mbgm
from opreward.pipeline import PerspectiveSet

LADDER_MODE = "ladder"
LINEAR_MODE = "linear"

COVERAGE_CAP = 1.5
UNIQUENESS_CAP = 0.3
MAX_FINAL_REWARD = 2.0  # coverage cap + uniqueness cap + format cap


@dataclass(frozen=True)
class RewardConfig:
    tau_match: float = 0.70
    tau_dup: float = 0.70
    ladder_mode: str = LADDER_MODE
    alpha_cov: float = COVERAGE_CAP
    alpha_uniq: float = UNIQUENESS_CAP
    masking: MaskingConfig = field(default_factory=MaskingConfig)
    dup_jaccard_threshold: float = 0.9

    def __post_init__(self):
        for name in ("tau_match", "tau_dup"):
            value = getattr(self, name)
            if not (-1.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [-1, 1], got {value}")
        if self.alpha_cov < 0 or self.alpha_uniq < 0:
            raise ValueError("alpha_cov and alpha_uniq must be non-negative")
        if self.ladder_mode not in (LADDER_MODE, LINEAR_MODE):
            raise ValueError(f"ladder_mode must be '{LADDER_MODE}' or '{LINEAR_MODE}'")
        if not (0.0 < self.dup_jaccard_threshold <= 1.0):
            raise ValueError("dup_jaccard_threshold must be in (0, 1]")


def merge_config(base: RewardConfig, overrides: dict) -> RewardConfig:
    """Apply a partial override mapping onto a config; unknown keys are an error."""
    if not overrides:
        return base
    allowed = {f.name for f in fields(RewardConfig)}
    updates = {}
    for key, value in overrides.items():
        if key not in allowed:
            raise ValueError(f"unknown config key: {key!r}")
        if key == "masking":
            mask_allowed = {f.name for f in fields(MaskingConfig)}
            unknown = set(value) - mask_allowed
            if unknown:
                raise ValueError(f"unknown masking keys: {sorted(unknown)}")
            mask_updates = dict(value)
            if "stopword_list" in mask_updates:
                mask_updates["stopword_list"] = frozenset(mask_updates["stopword_list"])
            updates["masking"] = replace(base.masking, **mask_updates)
        else:
            updates[key] = value
    return replace(base, **updates)


@dataclass(frozen=True)
class RewardBreakdown:
    r_cov: float
    r_uniq: float
    ladder_cov: float
    ladder_uniq: float
    format: FormatReward
    final: float
    matched_reference_count: int
    cluster_count: int
    candidate_count: int


def ladder_scale(r_cov: float, r_uniq: float, cfg: RewardConfig) -> tuple[float, float]:
    """Map the coverage and uniqueness rates to their scaled reward terms.

    Ladder mode applies the fixed stepwise tables (caps 1.5 and 0.3); linear
    mode returns alpha * rate instead.
    """
    if not (0.0 <= r_cov <= 1.0) or not (0.0 <= r_uniq <= 1.0):
        raise ValueError(f"rates must be in [0, 1], got r_cov={r_cov}, r_uniq={r_uniq}")
    if cfg.ladder_mode == LINEAR_MODE:
        return cfg.alpha_cov * r_cov, cfg.alpha_uniq * r_uniq

    if r_cov == 0.0:
        ladder_cov = 0.0
    elif r_cov < 0.2:
        ladder_cov = 0.3
    elif r_cov < 0.4:
        ladder_cov = 0.6
    elif r_cov < 0.6:
        ladder_cov = 0.9
    elif r_cov < 0.8:
        ladder_cov = 1.2
    else:
        ladder_cov = 1.5

    if r_uniq == 1.0:
        ladder_uniq = 0.3
    elif r_uniq > 0.8:
        ladder_uniq = 0.2
    elif r_uniq > 0.6:
        ladder_uniq = 0.1
    else:
        ladder_uniq = 0.0
    return ladder_cov, ladder_uniq


def _empty_match(reference_count: int, tau: float) -> MatchResult:
    return MatchResult(
        pairs=(),
        unmatched_candidates=frozenset(),
        unmatched_references=frozenset(range(reference_count)),
        threshold_used=tau,
    )


def coverage_reward(response: ParsedResponse, references: PerspectiveSet, cfg: RewardConfig,
                    provider: EmbeddingProvider, prompt: str | None = None) -> tuple[float, MatchResult]:
    """Fraction of reference perspectives matched one-to-one by the greedy
    matcher at ``tau_match``.  Candidates are the parsed explanations; a
    response with none scores zero coverage."""
    if len(references) == 0:
        raise ValueError("references must be non-empty")
    mask_prompt = references.prompt if prompt is None else prompt
    candidates = [line.explanation for line in response.core_lines]
    if not candidates:
        return 0.0, _empty_match(len(references), cfg.tau_match)
    matrix = similarity_matrix(candidates, references.explanations, mask_prompt, cfg.masking, provider)
    result = mbgm(matrix, cfg.tau_match)
    return len(result.pairs) / len(references), result


def _component_count(sims: np.ndarray, tau: float) -> int:
    """Connected components of the graph linking candidates with similarity
    >= tau (union-find; transitive closure of the pairwise relation)."""
    n = sims.shape[0]
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if sims[i, j] >= tau:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri
    return len({find(i) for i in range(n)})


def uniqueness_reward(response: ParsedResponse, cfg: RewardConfig, provider: EmbeddingProvider,
                      prompt: str = "") -> tuple[float, int]:
    """Ratio of distinct semantic clusters to candidate count at ``tau_dup``.
    Zero candidates yield (0.0, 0) by convention."""
    candidates = [line.explanation for line in response.core_lines]
    if not candidates:
        return 0.0, 0
    if len(candidates) == 1:
        return 1.0, 1
    masked = mask_prompt_keywords(prompt, candidates, cfg.masking)
    vectors = embed(masked, provider)
    sims = np.clip(vectors @ vectors.T, -1.0, 1.0)
    clusters = _component_count(sims, cfg.tau_dup)
    return clusters / len(candidates), clusters


def score_response(prompt: str, references: PerspectiveSet, raw_response: str,
                   cfg: RewardConfig, provider: EmbeddingProvider) -> RewardBreakdown:
    """Parse, score all three channels, apply ladder scaling, and sum.

    Parse failures degrade to zero-valued components; only provider failures
    propagate.
    """
    parsed = parse_response(raw_response)
    r_cov, match = coverage_reward(parsed, references, cfg, provider, prompt=prompt)
    r_uniq, clusters = uniqueness_reward(parsed, cfg, provider, prompt=prompt)
    fmt = format_reward(parsed, cfg.dup_jaccard_threshold)
    ladder_cov, ladder_uniq = ladder_scale(r_cov, r_uniq, cfg)
    final = math.fsum((ladder_cov, ladder_uniq, fmt.total))
    return RewardBreakdown(
        r_cov=r_cov,
        r_uniq=r_uniq,
        ladder_cov=ladder_cov,
        ladder_uniq=ladder_uniq,
        format=fmt,
        final=final,
        matched_reference_count=len(match.pairs),
        cluster_count=clusters,
        candidate_count=len(parsed.core_lines),
    )
