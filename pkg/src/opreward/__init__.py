"""Reward engine for Overton-pluralistic RLHF training loops.

Given a prompt, a set of human reference perspectives, and a group of model
responses, the engine parses the structured response format, matches
candidate perspectives to references one-to-one over embedding similarities,
computes coverage/uniqueness/format rewards with capped ladder scaling, and
emits group-normalized advantages for policy optimization.
"""

__version__ = "0.1.0"

from opreward.embeddings import (
    DimensionMismatchError,
    EmbeddingError,
    HttpEmbeddingProvider,
    LocalVectorStore,
    MaskingConfig,
    ProviderUnavailableError,
    SimilarityMatrix,
    UnknownTextError,
    embed,
    mask_prompt_keywords,
    op_mnrl_loss,
    similarity_matrix,
)
from opreward.formatting import (
    FormatReward,
    ParsedResponse,
    PerspectiveLine,
    format_reward,
    parse_response,
)
from opreward.grpo import AdvantageSet, RolloutGroup, group_advantages, grpo_objective
from opreward.matching import MATCH_BACKEND, MatchResult, mbgm, naive_match
from opreward.pipeline import JudgeVerdict, Perspective, PerspectiveSet, Triplet
from opreward.rewards import (
    RewardBreakdown,
    RewardConfig,
    coverage_reward,
    ladder_scale,
    score_response,
    uniqueness_reward,
)

__all__ = [
    "__version__",
    "AdvantageSet",
    "DimensionMismatchError",
    "EmbeddingError",
    "FormatReward",
    "HttpEmbeddingProvider",
    "JudgeVerdict",
    "LocalVectorStore",
    "MATCH_BACKEND",
    "MaskingConfig",
    "MatchResult",
    "ParsedResponse",
    "Perspective",
    "PerspectiveLine",
    "PerspectiveSet",
    "ProviderUnavailableError",
    "RewardBreakdown",
    "RewardConfig",
    "RolloutGroup",
    "SimilarityMatrix",
    "Triplet",
    "UnknownTextError",
    "coverage_reward",
    "embed",
    "format_reward",
    "group_advantages",
    "grpo_objective",
    "ladder_scale",
    "mask_prompt_keywords",
    "mbgm",
    "naive_match",
    "op_mnrl_loss",
    "parse_response",
    "score_response",
    "similarity_matrix",
    "uniqueness_reward",
]
