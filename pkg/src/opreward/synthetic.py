"""Deterministic synthetic data for hermetic matcher and protocol tests.

References get mutually orthogonal embedding axes and every candidate sits
at an exact target cosine from its source reference on a private axis, so
matcher behavior at any threshold is known by construction rather than
measured.  Distractors either live on their own axes (solvable cases) or are
planted closer to a reference than the true paraphrase (unsolvable cases).
"""

from __future__ import annotations

import numpy as np

from opreward.protocol import CP_SUBTASKS, ProtocolCase


def _blend(axis_main: int, axis_free: int, cosine: float, dim: int) -> list[float]:
    vec = np.zeros(dim)
    vec[axis_main] = cosine
    vec[axis_free] = np.sqrt(max(0.0, 1.0 - cosine * cosine))
    return vec.tolist()


def _unit(axis: int, dim: int) -> list[float]:
    vec = np.zeros(dim)
    vec[axis] = 1.0
    return vec.tolist()


def make_case(subtask: str, question_id: int, rng: np.random.Generator,
              paraphrase_sim: float = 0.9, distractor_sim: float = 0.0,
              solvable: bool = True) -> tuple[ProtocolCase, dict[str, list[float]]]:
    """Build one case plus the store rows backing it.

    Solvable cases put each paraphrase at ``paraphrase_sim`` from its own
    reference and give distractors ``distractor_sim`` (0 = orthogonal).  In
    unsolvable cases a distractor is planted at a similarity strictly above
    ``paraphrase_sim`` against a mapped reference, so any argmax-style
    matcher is pulled onto the distractor.
    """
    n_refs = 5 if subtask in CP_SUBTASKS else 3
    size = int(subtask[2:])
    n_cands = size
    n_mapped = size if subtask in CP_SUBTASKS else 3
    n_distractors = n_cands - n_mapped

    # One axis per reference, one private axis per candidate.
    dim = n_refs + n_cands
    tag = f"q{question_id}-{subtask}"
    question = f"synthetic topic {tag}"

    store: dict[str, list[float]] = {}
    references = []
    for j in range(n_refs):
        text = f"{tag} reference {j}"
        store[text] = _unit(j, dim)
        references.append(text)

    mapped_refs = sorted(rng.choice(n_refs, size=n_mapped, replace=False).tolist())
    candidates = []
    ground_truth: dict[int, int] = {}
    for k, ref_idx in enumerate(mapped_refs):
        text = f"{tag} paraphrase {k}"
        store[text] = _blend(ref_idx, n_refs + k, paraphrase_sim, dim)
        ground_truth[len(candidates)] = ref_idx
        candidates.append(text)
    for d in range(n_distractors):
        text = f"{tag} distractor {d}"
        axis_free = n_refs + n_mapped + d
        if solvable:
            sim = distractor_sim
        else:
            # beat the true paraphrase on its own reference
            sim = min(1.0, paraphrase_sim + 0.05)
        target_ref = mapped_refs[d % len(mapped_refs)]
        if solvable and distractor_sim == 0.0:
            store[text] = _unit(axis_free, dim)
        else:
            store[text] = _blend(target_ref, axis_free, sim, dim)
        candidates.append(text)

    if not solvable and n_distractors == 0:
        # cp-style unsolvable case: degrade one paraphrase below any useful
        # threshold so the exact-match verdict must fail
        weak = f"{tag} paraphrase 0"
        store[weak] = _blend(mapped_refs[0], n_refs, 0.05, dim)

    case = ProtocolCase(
        question=question,
        references=tuple(references),
        candidates=tuple(candidates),
        ground_truth=ground_truth,
        subtask=subtask,
    )
    return case, store


def make_suite(subtask_counts: dict[str, int], seed: int = 0, paraphrase_sim: float = 0.9,
               distractor_sim: float = 0.0, solvable: bool = True) -> tuple[list[ProtocolCase], dict[str, list[float]]]:
    """A batch of cases with a shared vector store, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    cases: list[ProtocolCase] = []
    store: dict[str, list[float]] = {}
    question_id = 0
    for subtask, count in subtask_counts.items():
        for _ in range(count):
            case, rows = make_case(
                subtask, question_id, rng,
                paraphrase_sim=paraphrase_sim,
                distractor_sim=distractor_sim,
                solvable=solvable,
            )
            cases.append(case)
            store.update(rows)
            question_id += 1
    return cases, store


def many_to_one_matrix(size: int) -> np.ndarray:
    """Adversarial similarity matrix family (sizes >= 2): every candidate's
    row argmax is reference 0, so the naive matcher assigns all of them
    there, while each candidate i >= 1 also has a clean fallback on its own
    reference for the one-to-one matcher."""
    if size < 2:
        raise ValueError("family starts at size 2")
    scores = np.full((size, size), 0.10)
    for i in range(size):
        scores[i, 0] = 0.90 - 0.005 * i
        if i > 0:
            scores[i, i] = 0.80
    return scores


def shared_framing_case(question_id: int = 0) -> tuple[ProtocolCase, dict[str, list[float]]]:
    """Protocol case where two references share framing (cosine 0.8), so the
    naive matcher double-assigns both candidates to reference 0 while the
    one-to-one matcher recovers the exact mapping at tau 0.70."""
    dim = 4
    tag = f"q{question_id}-adv"
    r0 = f"{tag} reference 0"
    r1 = f"{tag} reference 1"
    c0 = f"{tag} candidate 0"
    c1 = f"{tag} candidate 1"
    store = {
        r0: [1.0, 0.0, 0.0, 0.0],
        r1: [0.8, 0.6, 0.0, 0.0],
        # sims: c0 -> (0.95, 0.76), c1 -> (0.93, 0.744)
        c0: [0.95, 0.0, float(np.sqrt(1 - 0.95 ** 2)), 0.0],
        c1: [0.93, 0.0, 0.0, float(np.sqrt(1 - 0.93 ** 2))],
    }
    case = ProtocolCase(
        question=f"synthetic topic {tag}",
        references=(r0, r1),
        candidates=(c0, c1),
        ground_truth={0: 0, 1: 1},
        subtask="cp2",
    )
    return case, store
