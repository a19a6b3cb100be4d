"""Matcher evaluation protocol: absolute accuracy over paraphrase subtasks.

Cases come in two families.  ``cp_k`` cases supply k candidates, each a
paraphrase of a distinct reference (k never exceeds the reference count);
``rp_j`` cases fix three references and add distractor candidates up to j.
A case passes only when the predicted candidate-to-reference mapping equals
the ground truth exactly: every mapped candidate on its own reference and no
distractor matched anywhere.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from opreward.embeddings import EmbeddingProvider, MaskingConfig, similarity_matrix
from opreward.matching import mbgm, naive_match

CP_SUBTASKS = ("cp1", "cp2", "cp3", "cp4", "cp5")
RP_SUBTASKS = ("rp3", "rp4", "rp5")
SUBTASKS = CP_SUBTASKS + RP_SUBTASKS

MATCHERS = ("mbgm", "naive")

DEFAULT_TAU_GRID = tuple(round(0.65 + 0.01 * k, 2) for k in range(16))


@dataclass(frozen=True)
class ProtocolCase:
    question: str
    references: tuple[str, ...]
    candidates: tuple[str, ...]
    ground_truth: Mapping[int, int]
    subtask: str

    def __post_init__(self):
        if self.subtask not in SUBTASKS:
            raise ValueError(f"unknown subtask: {self.subtask!r}")
        object.__setattr__(self, "references", tuple(self.references))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        gt = {int(k): int(v) for k, v in dict(self.ground_truth).items()}
        object.__setattr__(self, "ground_truth", gt)
        for c_idx, r_idx in gt.items():
            if not (0 <= c_idx < len(self.candidates)):
                raise ValueError(f"ground-truth candidate index {c_idx} out of range")
            if not (0 <= r_idx < len(self.references)):
                raise ValueError(f"ground-truth reference index {r_idx} out of range")
        if len(set(gt.values())) != len(gt):
            raise ValueError("ground truth must map candidates to distinct references")
        size = int(self.subtask[2:])
        if self.subtask in CP_SUBTASKS:
            if len(self.candidates) != size or size > len(self.references):
                raise ValueError(f"{self.subtask} needs exactly {size} candidates, at most {len(self.references)} references")
            if len(gt) != size:
                raise ValueError(f"{self.subtask} needs every candidate mapped")
        else:
            if len(self.references) != 3 or len(self.candidates) != size:
                raise ValueError(f"{self.subtask} needs 3 references and {size} candidates")
            if len(gt) != 3:
                raise ValueError(f"{self.subtask} needs exactly 3 mapped candidates")


@dataclass(frozen=True)
class ProtocolReport:
    per_subtask_accuracy: dict[str, float]
    per_subtask_count: dict[str, int]
    per_subtask_latency: dict[str, float]
    avg1: float | None
    avg2: float | None
    total_avg: float | None
    per_case_latency: float


def evaluate_case(case: ProtocolCase, matcher: str, tau: float, provider: EmbeddingProvider,
                  masking: MaskingConfig | None = None) -> bool:
    """True iff the matcher reproduces the ground-truth mapping exactly."""
    if matcher not in MATCHERS:
        raise ValueError(f"matcher must be one of {MATCHERS}, got {matcher!r}")
    cfg = masking if masking is not None else MaskingConfig()
    matrix = similarity_matrix(case.candidates, case.references, case.question, cfg, provider)
    if matcher == "mbgm":
        pairs = mbgm(matrix, tau).pairs
    else:
        pairs = naive_match(matrix, tau)
    predicted = {i: j for i, j, _ in pairs}
    return predicted == dict(case.ground_truth)


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def run_protocol(cases: Iterable[ProtocolCase], matcher: str, tau: float,
                 provider: EmbeddingProvider, masking: MaskingConfig | None = None) -> ProtocolReport:
    """Per-subtask accuracy plus the three aggregate columns: the mean over
    cp subtasks, the mean over rp subtasks, and the mean over all subtasks
    present.  Subtasks with no cases are omitted, not scored as zero."""
    verdicts: dict[str, list[bool]] = {}
    latencies: dict[str, list[float]] = {}
    for case in cases:
        start = time.perf_counter()
        ok = evaluate_case(case, matcher, tau, provider, masking)
        elapsed = time.perf_counter() - start
        verdicts.setdefault(case.subtask, []).append(ok)
        latencies.setdefault(case.subtask, []).append(elapsed)

    accuracy = {s: _mean([1.0 if v else 0.0 for v in verdicts[s]]) for s in SUBTASKS if s in verdicts}
    counts = {s: len(verdicts[s]) for s in accuracy}
    latency = {s: _mean(latencies[s]) for s in accuracy}

    cp_scores = [accuracy[s] for s in CP_SUBTASKS if s in accuracy]
    rp_scores = [accuracy[s] for s in RP_SUBTASKS if s in accuracy]
    all_scores = list(accuracy.values())
    all_latencies = [lat for values in latencies.values() for lat in values]
    return ProtocolReport(
        per_subtask_accuracy=accuracy,
        per_subtask_count=counts,
        per_subtask_latency=latency,
        avg1=_mean(cp_scores) if cp_scores else None,
        avg2=_mean(rp_scores) if rp_scores else None,
        total_avg=_mean(all_scores) if all_scores else None,
        per_case_latency=_mean(all_latencies) if all_latencies else 0.0,
    )


def threshold_sweep(cases: Sequence[ProtocolCase], matcher: str, tau_grid: Sequence[float],
                    provider: EmbeddingProvider, masking: MaskingConfig | None = None) -> dict[float, ProtocolReport]:
    """One protocol run per threshold, in grid order."""
    return {float(tau): run_protocol(cases, matcher, tau, provider, masking) for tau in tau_grid}


def _report_rows(report: ProtocolReport) -> list[tuple[str, float, int, float]]:
    rows = [
        (s, report.per_subtask_accuracy[s], report.per_subtask_count[s], report.per_subtask_latency[s])
        for s in SUBTASKS
        if s in report.per_subtask_accuracy
    ]
    cp_n = sum(report.per_subtask_count.get(s, 0) for s in CP_SUBTASKS)
    rp_n = sum(report.per_subtask_count.get(s, 0) for s in RP_SUBTASKS)
    if report.avg1 is not None:
        rows.append(("avg1", report.avg1, cp_n, report.per_case_latency))
    if report.avg2 is not None:
        rows.append(("avg2", report.avg2, rp_n, report.per_case_latency))
    if report.total_avg is not None:
        rows.append(("total_avg", report.total_avg, cp_n + rp_n, report.per_case_latency))
    return rows


def report_csv(report: ProtocolReport) -> str:
    lines = ["subtask,accuracy,n_cases,mean_latency_s"]
    for subtask, acc, n, lat in _report_rows(report):
        lines.append(f"{subtask},{acc!r},{n},{lat:.6f}")
    return "\n".join(lines) + "\n"


def sweep_csv(reports: Mapping[float, ProtocolReport]) -> str:
    lines = ["tau,subtask,accuracy,n_cases,mean_latency_s"]
    for tau in reports:
        for subtask, acc, n, lat in _report_rows(reports[tau]):
            lines.append(f"{tau!r},{subtask},{acc!r},{n},{lat:.6f}")
    return "\n".join(lines) + "\n"


def case_to_row(case: ProtocolCase) -> dict:
    return {
        "question": case.question,
        "references": list(case.references),
        "candidates": list(case.candidates),
        "ground_truth": {str(k): v for k, v in case.ground_truth.items()},
        "subtask": case.subtask,
    }


def case_from_row(row: dict) -> ProtocolCase:
    return ProtocolCase(
        question=row["question"],
        references=tuple(row["references"]),
        candidates=tuple(row["candidates"]),
        ground_truth={int(k): int(v) for k, v in row["ground_truth"].items()},
        subtask=row["subtask"],
    )


def load_cases_jsonl(path) -> list[ProtocolCase]:
    cases = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                cases.append(case_from_row(json.loads(line)))
    return cases
