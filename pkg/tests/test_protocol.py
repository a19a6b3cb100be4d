import json

import numpy as np
import pytest

from opreward.embeddings import LocalVectorStore, MaskingConfig
from opreward.protocol import (
    DEFAULT_TAU_GRID,
    ProtocolCase,
    case_from_row,
    case_to_row,
    evaluate_case,
    load_cases_jsonl,
    report_csv,
    run_protocol,
    sweep_csv,
    threshold_sweep,
)
from opreward.synthetic import make_case, make_suite, many_to_one_matrix, shared_framing_case
from opreward.matching import mbgm, naive_match

NO_MASK = MaskingConfig(enabled=False)


class TestProtocolCaseValidation:
    def _case(self, **overrides):
        base = dict(
            question="q",
            references=("r0", "r1", "r2", "r3", "r4"),
            candidates=("c0", "c1"),
            ground_truth={0: 0, 1: 1},
            subtask="cp2",
        )
        base.update(overrides)
        return ProtocolCase(**base)

    def test_valid(self):
        self._case()

    def test_unknown_subtask(self):
        with pytest.raises(ValueError):
            self._case(subtask="cp9")

    def test_cp_sizes(self):
        with pytest.raises(ValueError):
            self._case(candidates=("c0",))  # cp2 needs 2
        with pytest.raises(ValueError):
            self._case(ground_truth={0: 0})  # all candidates mapped

    def test_rp_sizes(self):
        ProtocolCase("q", ("r0", "r1", "r2"), ("c0", "c1", "c2", "c3"),
                     {0: 0, 1: 1, 2: 2}, "rp4")
        with pytest.raises(ValueError):
            ProtocolCase("q", ("r0", "r1"), ("c0", "c1", "c2", "c3"), {0: 0, 1: 1, 2: 1}, "rp4")
        with pytest.raises(ValueError):
            ProtocolCase("q", ("r0", "r1", "r2"), ("c0", "c1", "c2", "c3"), {0: 0, 1: 1}, "rp4")

    def test_distinct_reference_targets(self):
        with pytest.raises(ValueError):
            self._case(ground_truth={0: 1, 1: 1})

    def test_index_ranges(self):
        with pytest.raises(ValueError):
            self._case(ground_truth={0: 0, 5: 1})
        with pytest.raises(ValueError):
            self._case(ground_truth={0: 0, 1: 9})


class TestEvaluateCase:
    def test_verbatim_copies_pass(self):
        refs = [f"ref sentence {i}" for i in range(5)]
        store = LocalVectorStore({t: [1.0 if i == j else 0.0 for j in range(5)] for i, t in enumerate(refs)})
        case = ProtocolCase("q", tuple(refs), (refs[2], refs[4]), {0: 2, 1: 4}, "cp2")
        assert evaluate_case(case, "mbgm", 0.70, store, NO_MASK)

    def test_distractor_match_fails_rp_case(self):
        case, store_map = make_case("rp4", 0, np.random.default_rng(0),
                                    paraphrase_sim=0.9, distractor_sim=0.85)
        provider = LocalVectorStore(store_map)
        # distractor sits above tau, argmax still prefers the paraphrase;
        # but exactness demands the distractor stay unmatched
        assert not evaluate_case(case, "naive", 0.70, provider, NO_MASK)

    def test_solvable_rp_case_passes(self):
        case, store_map = make_case("rp5", 1, np.random.default_rng(1))
        assert evaluate_case(case, "mbgm", 0.70, LocalVectorStore(store_map), NO_MASK)

    def test_adversarial_naive_fails_mbgm_passes(self):
        case, store_map = shared_framing_case()
        provider = LocalVectorStore(store_map)
        assert evaluate_case(case, "mbgm", 0.70, provider, NO_MASK)
        assert not evaluate_case(case, "naive", 0.70, provider, NO_MASK)

    def test_unknown_matcher(self):
        case, store_map = shared_framing_case()
        with pytest.raises(ValueError):
            evaluate_case(case, "hungarian", 0.70, LocalVectorStore(store_map), NO_MASK)

    def test_reference_permutation_invariance(self):
        case, store_map = make_case("cp3", 2, np.random.default_rng(5))
        provider = LocalVectorStore(store_map)
        base = evaluate_case(case, "mbgm", 0.70, provider, NO_MASK)
        rng = np.random.default_rng(6)
        perm = rng.permutation(len(case.references)).tolist()
        shuffled_refs = tuple(case.references[p] for p in perm)
        remap = {old: new for new, old in enumerate(perm)}
        shuffled = ProtocolCase(
            question=case.question,
            references=shuffled_refs,
            candidates=case.candidates,
            ground_truth={c: remap[r] for c, r in case.ground_truth.items()},
            subtask=case.subtask,
        )
        assert evaluate_case(shuffled, "mbgm", 0.70, provider, NO_MASK) == base


class TestRunProtocol:
    def test_all_solvable_scores_one(self):
        cases, store_map = make_suite({"cp1": 2, "cp3": 2, "rp4": 2}, seed=3)
        report = run_protocol(cases, "mbgm", 0.70, LocalVectorStore(store_map), NO_MASK)
        assert report.per_subtask_accuracy == {"cp1": 1.0, "cp3": 1.0, "rp4": 1.0}
        assert report.avg1 == 1.0 and report.avg2 == 1.0 and report.total_avg == 1.0
        assert report.per_case_latency > 0.0

    def test_empty_subtask_omitted(self):
        cases, store_map = make_suite({"cp2": 2}, seed=4)
        report = run_protocol(cases, "mbgm", 0.70, LocalVectorStore(store_map), NO_MASK)
        assert "rp3" not in report.per_subtask_accuracy
        assert report.avg2 is None
        assert report.total_avg == report.avg1

    def test_planted_eighty_percent(self):
        good, store_a = make_suite({"cp3": 8}, seed=5)
        bad, store_b = make_suite({"rp4": 2}, seed=6, solvable=False)
        store = LocalVectorStore({**store_a, **store_b})
        report = run_protocol(good + bad, "mbgm", 0.70, store, NO_MASK)
        assert report.per_subtask_accuracy == {"cp3": 1.0, "rp4": 0.0}
        total = sum(1 for _ in good) * 1.0
        assert report.total_avg == pytest.approx(0.5)  # mean over the two subtasks
        # absolute accuracy over cases
        per_case = (8 * 1.0 + 2 * 0.0) / 10
        assert per_case == 0.8


class TestThresholdSweep:
    def test_degenerate_all_ones(self):
        refs = ["same sentence"]
        store = LocalVectorStore({"same sentence": [1.0]})
        case = ProtocolCase("q", tuple(refs), (refs[0],), {0: 0}, "cp1")
        reports = threshold_sweep([case], "mbgm", DEFAULT_TAU_GRID, store, NO_MASK)
        assert all(r.per_subtask_accuracy["cp1"] == 1.0 for r in reports.values())

    def test_planted_jump_between_grid_points(self):
        # true pairs at 0.7205, distractors at 0.6805 against a mapped reference
        cases, store_map = make_suite({"rp4": 3}, seed=7, paraphrase_sim=0.7205,
                                      distractor_sim=0.6805)
        provider = LocalVectorStore(store_map)

        # the row-argmax matcher admits the distractor until the threshold
        # crosses it: accuracy jumps between the 0.68 and 0.69 grid points
        reports = threshold_sweep(cases, "naive", DEFAULT_TAU_GRID, provider, NO_MASK)
        acc = {tau: r.per_subtask_accuracy["rp4"] for tau, r in reports.items()}
        for tau in (0.65, 0.66, 0.67, 0.68):
            assert acc[tau] == 0.0  # distractor above threshold
        for tau in (0.69, 0.70, 0.71, 0.72):
            assert acc[tau] == 1.0  # only the true pairs survive
        for tau in (0.73, 0.80):
            assert acc[tau] == 0.0  # true pairs fall below threshold

        # one-to-one greedy matching is immune to the weaker distractor (the
        # true pairs consume every reference first); its jump sits at the
        # upper boundary where the true pairs drop out
        reports = threshold_sweep(cases, "mbgm", DEFAULT_TAU_GRID, provider, NO_MASK)
        acc = {tau: r.per_subtask_accuracy["rp4"] for tau, r in reports.items()}
        for tau in (0.65, 0.68, 0.69, 0.72):
            assert acc[tau] == 1.0
        for tau in (0.73, 0.80):
            assert acc[tau] == 0.0

    def test_empty_grid(self):
        assert threshold_sweep([], "mbgm", [], LocalVectorStore({"x": [1.0]})) == {}


class TestCsvAndIO:
    def test_report_csv_shape(self):
        cases, store_map = make_suite({"cp2": 2, "rp3": 1}, seed=8)
        report = run_protocol(cases, "mbgm", 0.70, LocalVectorStore(store_map), NO_MASK)
        text = report_csv(report)
        lines = text.strip().splitlines()
        assert lines[0] == "subtask,accuracy,n_cases,mean_latency_s"
        labels = [line.split(",")[0] for line in lines[1:]]
        assert labels == ["cp2", "rp3", "avg1", "avg2", "total_avg"]

    def test_sweep_csv_has_tau_column(self):
        cases, store_map = make_suite({"cp1": 1}, seed=9)
        reports = threshold_sweep(cases, "mbgm", (0.65, 0.70), LocalVectorStore(store_map), NO_MASK)
        lines = sweep_csv(reports).strip().splitlines()
        assert lines[0] == "tau,subtask,accuracy,n_cases,mean_latency_s"
        taus = {line.split(",")[0] for line in lines[1:]}
        assert taus == {"0.65", "0.7"}

    def test_case_round_trip(self, tmp_path):
        cases, _ = make_suite({"cp4": 2, "rp5": 1}, seed=10)
        path = tmp_path / "cases.jsonl"
        path.write_text("\n".join(json.dumps(case_to_row(c)) for c in cases) + "\n", encoding="utf-8")
        loaded = load_cases_jsonl(path)
        assert loaded == cases

    def test_default_grid_matches_published_rows(self):
        assert DEFAULT_TAU_GRID[0] == 0.65
        assert DEFAULT_TAU_GRID[-1] == 0.80
        assert len(DEFAULT_TAU_GRID) == 16


class TestManyToOneFamily:
    @pytest.mark.parametrize("size", [2, 3, 4, 5, 6])
    def test_naive_duplicates_mbgm_clean(self, size):
        scores = many_to_one_matrix(size)
        naive_pairs = naive_match(scores, 0.70)
        naive_refs = [j for _, j, _ in naive_pairs]
        assert len(naive_refs) != len(set(naive_refs))  # at least one duplicate
        greedy = mbgm(scores, 0.70)
        greedy_refs = [j for _, j, _ in greedy.pairs]
        assert len(greedy_refs) == len(set(greedy_refs))
        assert len(greedy.pairs) == size  # everyone finds a home one-to-one
