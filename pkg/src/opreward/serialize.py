"""Canonical JSON encoding shared by the CLI and the HTTP service, so both
paths emit byte-identical payloads for the same logical result."""

from __future__ import annotations

import json

from opreward.embeddings import MaskingConfig
from opreward.formatting import FormatReward
from opreward.grpo import AdvantageSet
from opreward.matching import MatchResult
from opreward.rewards import RewardBreakdown, RewardConfig


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def format_reward_dict(fr: FormatReward) -> dict:
    return {
        "phi_tag": fr.phi_tag,
        "phi_line": fr.phi_line,
        "phi_name": fr.phi_name,
        "phi_pen": fr.phi_pen,
        "total": fr.total,
    }


def breakdown_dict(b: RewardBreakdown) -> dict:
    return {
        "r_cov": b.r_cov,
        "r_uniq": b.r_uniq,
        "ladder_cov": b.ladder_cov,
        "ladder_uniq": b.ladder_uniq,
        "format": format_reward_dict(b.format),
        "final": b.final,
        "matched_reference_count": b.matched_reference_count,
        "cluster_count": b.cluster_count,
        "candidate_count": b.candidate_count,
    }


def match_result_dict(mr: MatchResult) -> dict:
    return {
        "pairs": [[i, j, score] for i, j, score in mr.pairs],
        "unmatched_candidates": sorted(mr.unmatched_candidates),
        "unmatched_references": sorted(mr.unmatched_references),
        "threshold_used": mr.threshold_used,
    }


def advantage_set_dict(a: AdvantageSet) -> dict:
    return {
        "per_response_advantage": list(a.per_response_advantage),
        "degenerate": a.degenerate,
    }


def masking_config_dict(m: MaskingConfig) -> dict:
    return {
        "enabled": m.enabled,
        "placeholder": m.placeholder,
        "min_token_length": m.min_token_length,
        "stopword_list": sorted(m.stopword_list),
    }


def reward_config_dict(cfg: RewardConfig) -> dict:
    return {
        "tau_match": cfg.tau_match,
        "tau_dup": cfg.tau_dup,
        "ladder_mode": cfg.ladder_mode,
        "alpha_cov": cfg.alpha_cov,
        "alpha_uniq": cfg.alpha_uniq,
        "masking": masking_config_dict(cfg.masking),
        "dup_jaccard_threshold": cfg.dup_jaccard_threshold,
    }


def score_payload(breakdowns, advantages: AdvantageSet | None, cfg: RewardConfig,
                  version: str) -> dict:
    payload = {
        "breakdowns": [breakdown_dict(b) for b in breakdowns],
        "advantages": advantage_set_dict(advantages) if advantages is not None else None,
        "engine_version": version,
        "config_echo": reward_config_dict(cfg),
    }
    return payload
