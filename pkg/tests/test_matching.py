import numpy as np
import pytest

from opreward.matching import MATCH_BACKEND, MatchResult, mbgm, naive_match
from opreward.matching._greedy_py import greedy_pairs as greedy_pairs_py
from oracles import greedy_replay, row_argmax_pairs

try:
    from opreward.matching._greedy import greedy_pairs as greedy_pairs_cy
except ImportError:
    greedy_pairs_cy = None


class TestMbgmExamples:
    def test_single_entry_above_threshold(self):
        result = mbgm([[0.9]], 0.7)
        assert result.pairs == ((0, 0, 0.9),)
        assert result.unmatched_candidates == frozenset()
        assert result.unmatched_references == frozenset()

    def test_second_best_below_threshold_stays_unmatched(self):
        result = mbgm([[0.9, 0.85], [0.88, 0.2]], 0.7)
        assert result.pairs == ((0, 0, 0.9),)
        assert result.unmatched_candidates == frozenset({1})
        assert result.unmatched_references == frozenset({1})

    def test_all_below_threshold(self):
        result = mbgm([[0.5, 0.1], [0.3, 0.2]], 0.7)
        assert result.pairs == ()
        assert result.unmatched_candidates == frozenset({0, 1})
        assert result.unmatched_references == frozenset({0, 1})

    def test_surplus_rows_and_columns(self):
        # 3 candidates x 2 references; one candidate must end unmatched
        result = mbgm([[0.9, 0.1], [0.1, 0.8], [0.75, 0.72]], 0.7)
        assert result.pairs == ((0, 0, 0.9), (1, 1, 0.8))
        assert result.unmatched_candidates == frozenset({2})
        # 2 candidates x 3 references; one reference unmatched
        result = mbgm([[0.9, 0.1, 0.2], [0.1, 0.8, 0.75]], 0.7)
        assert result.unmatched_references == frozenset({2})

    def test_tie_breaks_lowest_row_major(self):
        result = mbgm([[0.9, 0.9], [0.9, 0.9]], 0.7)
        assert result.pairs == ((0, 0, 0.9), (1, 1, 0.9))

    def test_tau_boundary_inclusive(self):
        assert mbgm([[0.7]], 0.7).pairs == ((0, 0, 0.7),)

    def test_validation(self):
        with pytest.raises(ValueError):
            mbgm([[0.5]], 1.5)
        with pytest.raises(ValueError):
            mbgm(np.empty((0, 3)), 0.5)
        with pytest.raises(ValueError):
            mbgm([[float("nan")]], 0.5)

    def test_negative_tau_allowed(self):
        result = mbgm([[-0.5]], -1.0)
        assert result.pairs == ((0, 0, -0.5),)


class TestNaiveExamples:
    def test_many_to_one(self):
        pairs = naive_match([[0.9, 0.85], [0.88, 0.2]], 0.7)
        assert pairs == [(0, 0, 0.9), (1, 0, 0.88)]

    def test_below_threshold_dropped(self):
        assert naive_match([[0.5]], 0.7) == []

    def test_tie_lowest_reference(self):
        assert naive_match([[0.9, 0.9]], 0.7) == [(0, 0, 0.9)]

    def test_matches_row_argmax_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            m, n = rng.integers(1, 7, size=2)
            scores = np.round(rng.uniform(-1, 1, size=(m, n)), 3)
            tau = float(rng.uniform(-1, 1))
            assert naive_match(scores, tau) == row_argmax_pairs(scores.tolist(), tau)


class TestOracleEquivalence:
    def test_matches_replay_on_random_matrices(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            m, n = rng.integers(1, 6, size=2)
            scores = rng.uniform(-1, 1, size=(m, n))
            tau = float(rng.uniform(-0.5, 0.9))
            got = mbgm(scores, tau).pairs
            want = tuple(greedy_replay(scores.tolist(), tau))
            assert got == want

    def test_matches_replay_with_ties(self):
        rng = np.random.default_rng(43)
        for _ in range(300):
            m, n = rng.integers(1, 6, size=2)
            # coarse grid forces frequent exact ties
            scores = rng.choice([0.2, 0.7, 0.8, 0.9], size=(m, n))
            got = mbgm(scores, 0.6).pairs
            want = tuple(greedy_replay(scores.tolist(), 0.6))
            assert got == want

    def test_backends_agree(self):
        if greedy_pairs_cy is None:
            pytest.skip("compiled matcher not built")
        rng = np.random.default_rng(44)
        for _ in range(200):
            m, n = rng.integers(1, 9, size=2)
            scores = np.ascontiguousarray(rng.uniform(-1, 1, size=(m, n)))
            tau = float(rng.uniform(-1, 1))
            assert greedy_pairs_cy(scores.copy(), tau) == greedy_pairs_py(scores, tau)


class TestInvariants:
    def test_one_to_one_and_threshold(self):
        rng = np.random.default_rng(45)
        for _ in range(500):
            m, n = rng.integers(1, 13, size=2)
            scores = rng.uniform(-1, 1, size=(m, n))
            tau = float(rng.uniform(-1, 1))
            result = mbgm(scores, tau)
            rows = [i for i, _, _ in result.pairs]
            cols = [j for _, j, _ in result.pairs]
            assert len(rows) == len(set(rows))
            assert len(cols) == len(set(cols))
            assert all(score >= tau for _, _, score in result.pairs)
            assert len(result.pairs) <= min(m, n)
            # exact partition on both sides
            assert set(rows) | result.unmatched_candidates == set(range(m))
            assert set(cols) | result.unmatched_references == set(range(n))

    def test_accepted_pairs_are_survivor_maxima(self):
        rng = np.random.default_rng(46)
        for _ in range(100):
            m, n = rng.integers(2, 8, size=2)
            scores = rng.uniform(0, 1, size=(m, n))
            tau = 0.3
            result = mbgm(scores, tau)
            # replay the trace: before each acceptance the pair must be the
            # max of its surviving row and column
            alive_rows = set(range(m))
            alive_cols = set(range(n))
            for i, j, value in result.pairs:
                row_max = max(scores[i, c] for c in alive_cols if scores[i, c] >= tau)
                col_max = max(scores[r, j] for r in alive_rows if scores[r, j] >= tau)
                assert value == row_max == col_max
                alive_rows.discard(i)
                alive_cols.discard(j)

    def test_determinism(self):
        rng = np.random.default_rng(47)
        scores = rng.choice([0.2, 0.75, 0.9], size=(6, 6))
        assert mbgm(scores, 0.7) == mbgm(scores, 0.7)
        assert naive_match(scores, 0.7) == naive_match(scores, 0.7)

    def test_greedy_order_differs_from_eq_definition_on_conflicts(self):
        # a pair that is only column-best after an earlier invalidation is
        # still accepted: greedy resolves conflicts sequentially
        scores = [[0.9, 0.8], [0.85, 0.75]]
        result = mbgm(scores, 0.7)
        assert result.pairs == ((0, 0, 0.9), (1, 1, 0.75))


def test_match_result_matched_reference_indices():
    result = MatchResult(pairs=((0, 2, 0.9), (1, 0, 0.8)),
                         unmatched_candidates=frozenset(),
                         unmatched_references=frozenset({1}),
                         threshold_used=0.7)
    assert result.matched_reference_indices == frozenset({0, 2})


def test_backend_is_reported():
    assert MATCH_BACKEND in ("cython", "python")
