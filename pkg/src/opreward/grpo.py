"""Group-relative advantage normalization and the clipped surrogate objective.

Value computation only: no autograd, no parameter updates.  Rollout
generation and the trainer live outside this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_STD_EPSILON = 1e-8

KL_TOKEN_MEAN = "token_mean"
KL_SEQUENCE_SUM = "sequence_sum"


@dataclass(frozen=True)
class RolloutGroup:
    """K sampled responses for one prompt: scalar rewards plus (optionally)
    per-token log-probs under the new, old, and reference policies."""

    prompt_id: str
    rewards: tuple[float, ...]
    token_logprobs_new: tuple[tuple[float, ...], ...] | None = None
    token_logprobs_old: tuple[tuple[float, ...], ...] | None = None
    token_logprobs_ref: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if not self.rewards:
            raise ValueError("rewards must be non-empty")
        for name in ("token_logprobs_new", "token_logprobs_old", "token_logprobs_ref"):
            logprobs = getattr(self, name)
            if logprobs is not None and len(logprobs) != len(self.rewards):
                raise ValueError(f"{name} must have one entry per response")
        present = [lp for lp in (self.token_logprobs_new, self.token_logprobs_old,
                                 self.token_logprobs_ref) if lp is not None]
        for i in range(len(self.rewards)):
            lengths = {len(lp[i]) for lp in present}
            if len(lengths) > 1:
                raise ValueError(f"response {i}: token counts differ across log-prob sets: {sorted(lengths)}")

    @property
    def group_size(self) -> int:
        return len(self.rewards)


@dataclass(frozen=True)
class AdvantageSet:
    """Per-response advantages; token-level values are these broadcast over
    every token of the response."""

    per_response_advantage: tuple[float, ...]
    degenerate: bool


def group_advantages(rewards, std_epsilon: float = DEFAULT_STD_EPSILON) -> AdvantageSet:
    """Normalize rewards within the group: (R_i - mean) / population std.

    A group whose std falls below ``std_epsilon`` (all-equal rewards, common
    early in training) gets all-zero advantages and the degenerate flag
    instead of an error.
    """
    if std_epsilon <= 0:
        raise ValueError("std_epsilon must be positive")
    arr = np.asarray(list(rewards), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("rewards must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("rewards must be finite")
    std = float(arr.std())  # population std (ddof=0)
    if std < std_epsilon:
        return AdvantageSet(per_response_advantage=(0.0,) * arr.size, degenerate=True)
    normalized = (arr - arr.mean()) / std
    return AdvantageSet(per_response_advantage=tuple(float(a) for a in normalized), degenerate=False)


def grpo_objective(group: RolloutGroup, advantages: AdvantageSet, clip_epsilon: float,
                   kl_beta: float, kl_aggregation: str = KL_TOKEN_MEAN) -> tuple[float, float, float]:
    """Clipped-ratio surrogate minus a KL penalty toward the reference policy.

    Per token: ratio rho = exp(logp_new - logp_old) and the term
    ``min(rho * A, clip(rho, 1-eps, 1+eps) * A)``; terms are averaged over
    tokens within a response, then over responses.  The KL penalty uses the
    nonnegative per-token estimator ``exp(d) - d - 1`` with
    ``d = logp_ref - logp_new``, aggregated per ``kl_aggregation`` (mean over
    tokens, or summed per sequence) and averaged over responses.

    Returns (objective, mean_ratio, mean_kl) where the diagnostics use the
    same response-mean weighting.
    """
    if clip_epsilon <= 0:
        raise ValueError("clip_epsilon must be positive")
    if kl_beta < 0:
        raise ValueError("kl_beta must be non-negative")
    if kl_aggregation not in (KL_TOKEN_MEAN, KL_SEQUENCE_SUM):
        raise ValueError(f"unknown kl_aggregation: {kl_aggregation!r}")
    if group.token_logprobs_new is None or group.token_logprobs_old is None or group.token_logprobs_ref is None:
        raise ValueError("grpo_objective needs new, old, and ref log-probs")
    if len(advantages.per_response_advantage) != group.group_size:
        raise ValueError("advantages must have one entry per response")

    term_means = []
    ratio_means = []
    kl_values = []
    for i in range(group.group_size):
        new = np.asarray(group.token_logprobs_new[i], dtype=np.float64)
        old = np.asarray(group.token_logprobs_old[i], dtype=np.float64)
        ref = np.asarray(group.token_logprobs_ref[i], dtype=np.float64)
        if not (new.shape == old.shape == ref.shape):
            raise ValueError(f"response {i}: log-prob lengths differ")
        if new.size == 0:
            raise ValueError(f"response {i}: empty token sequence")
        if not (np.all(np.isfinite(new)) and np.all(np.isfinite(old)) and np.all(np.isfinite(ref))):
            raise ValueError(f"response {i}: non-finite log-probs")

        adv = advantages.per_response_advantage[i]
        ratio = np.exp(new - old)
        clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
        term = np.minimum(ratio * adv, clipped * adv)
        delta = ref - new
        kl = np.exp(delta) - delta - 1.0

        term_means.append(float(term.mean()))
        ratio_means.append(float(ratio.mean()))
        kl_values.append(float(kl.mean() if kl_aggregation == KL_TOKEN_MEAN else kl.sum()))

    surrogate = float(np.mean(term_means))
    mean_ratio = float(np.mean(ratio_means))
    mean_kl = float(np.mean(kl_values))
    return surrogate - kl_beta * mean_kl, mean_ratio, mean_kl
