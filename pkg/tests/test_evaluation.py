import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prioritizer import (
    CorrectnessVector,
    DataError,
    ScoreRecord,
    apfd_score,
    cumulative_error_curve,
    derive_correctness,
    evaluate_prioritization,
    rank_by_score,
    select_top,
)
from prioritizer.evaluation import read_indices, write_curve, write_indices, write_report

from oracles import oracle_apfd, oracle_prefix_counts


def correctness(bools):
    return CorrectnessVector(correct=np.array(bools, dtype=bool), task="classification")


def records(scores, method="softmax"):
    return [ScoreRecord(i, method, float(s)) for i, s in enumerate(scores)]


class TestDeriveCorrectness:
    def test_classification_argmax(self):
        preds = np.array([[0.1, 0.9], [0.8, 0.2], [0.4, 0.6]])
        labels = np.array([1, 1, 0], dtype=np.uint32)
        out = derive_correctness(preds, labels, "classification")
        assert out.correct.tolist() == [True, False, False]

    def test_label_out_of_range(self):
        preds = np.ones((2, 3))
        with pytest.raises(DataError):
            derive_correctness(preds, np.array([0, 3], dtype=np.uint32), "classification")

    def test_regression_boundary_is_correct(self):
        preds = np.array([[0.25], [0.2500001], [0.0]])
        labels = np.zeros((3, 1))
        out = derive_correctness(preds, labels, "regression", threshold=0.25)
        assert out.correct.tolist() == [True, False, True]

    def test_regression_mae_over_outputs(self):
        preds = np.array([[0.1, 0.3], [0.5, 0.5]])
        labels = np.zeros((2, 2))
        out = derive_correctness(preds, labels, "regression", threshold=0.25)
        # MAE 0.2 correct, MAE 0.5 incorrect
        assert out.correct.tolist() == [True, False]

    def test_regression_shape_mismatch(self):
        with pytest.raises(Exception):
            derive_correctness(np.ones((2, 2)), np.zeros((3, 2)), "regression")


class TestRanking:
    def test_descending(self):
        assert rank_by_score(records([0.1, 0.9, 0.5])) == (1, 2, 0)

    def test_stability_on_ties(self):
        assert rank_by_score(records([0.5, 0.5, 0.5])) == (0, 1, 2)
        assert rank_by_score(records([0.3, 0.5, 0.5, 0.1])) == (1, 2, 0, 3)

    def test_inf_first(self):
        perm = rank_by_score(records([1.0, math.inf, 2.0]))
        assert perm == (1, 2, 0)

    def test_mixed_methods_rejected(self):
        recs = [ScoreRecord(0, "softmax", 1.0), ScoreRecord(1, "dsa", 2.0)]
        with pytest.raises(DataError):
            rank_by_score(recs)

    def test_nan_rejected(self):
        with pytest.raises(DataError):
            rank_by_score(records([1.0, math.nan]))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=60))
    def test_matches_stable_sort_oracle(self, scores):
        perm = rank_by_score(records(scores))
        want = [i for _, i in sorted(((-s, i) for i, s in enumerate(scores)))]
        assert list(perm) == want

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0.001, 100), min_size=2, max_size=40), st.floats(0.5, 10))
    def test_invariant_under_positive_scaling(self, scores, factor):
        base = rank_by_score(records(scores))
        scaled = rank_by_score(records([s * factor for s in scores]))
        assert base == scaled


class TestCurve:
    def test_all_correct_curve(self):
        curve = cumulative_error_curve((0, 1, 2), correctness([True, True, True]))
        assert curve == (0, 0, 0)

    def test_all_wrong_curve(self):
        curve = cumulative_error_curve((2, 0, 1), correctness([False] * 3))
        assert curve == (1, 2, 3)

    def test_not_permutation_rejected(self):
        with pytest.raises(DataError):
            cumulative_error_curve((0, 0, 1), correctness([True] * 3))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 50))
    def test_matches_prefix_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        perm = tuple(int(i) for i in rng.permutation(n))
        errs = rng.integers(0, 2, size=n).astype(bool)
        curve = cumulative_error_curve(perm, correctness(~errs))
        assert list(curve) == oracle_prefix_counts(perm, errs)


class TestApfd:
    def test_ideal_is_100(self):
        # n=20, m=5, all errors first
        curve = tuple(min(k, 5) for k in range(1, 21))
        assert apfd_score(curve, 5) == 100.0

    def test_auc_83_matches_printed_ratio(self):
        curve = (1, 2, 3, 3, 3, 3, 4, 4, 5) + (5,) * 11
        assert sum(curve) == 83
        value = apfd_score(curve, 5)
        assert abs(value - 92.22) <= 0.02
        assert abs(value - 92.23) <= 0.02

    def test_worst_ordering(self):
        curve = (0,) * 15 + (1, 2, 3, 4, 5)
        assert apfd_score(curve, 5) == pytest.approx(100.0 * 15 / 90)

    def test_zero_errors_rejected(self):
        with pytest.raises(DataError):
            apfd_score((0, 0, 0), 0)

    def test_range_bounds(self):
        assert 0.0 < apfd_score((0, 1), 1) <= 100.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 60))
    def test_matches_oracle_and_bounds(self, seed, n):
        rng = np.random.default_rng(seed)
        errs = rng.integers(0, 2, size=n).astype(bool)
        if not errs.any():
            errs[rng.integers(0, n)] = True
        perm = tuple(int(i) for i in rng.permutation(n))
        curve = cumulative_error_curve(perm, correctness(~errs))
        got = apfd_score(curve, int(errs.sum()))
        assert got == pytest.approx(oracle_apfd(list(curve)))
        assert 0.0 < got <= 100.0

    def test_100_iff_errors_first(self):
        # errors first in any internal arrangement
        assert apfd_score((1, 2, 2, 2), 2) == 100.0
        # one error displaced -> below 100
        assert apfd_score((1, 1, 2, 2), 2) < 100.0


class TestEvaluate:
    def test_full_pipeline_report(self):
        recs = records([0.9, 0.1, 0.5, 0.7])
        corr = correctness([False, True, True, False])
        report = evaluate_prioritization(recs, corr)
        assert report.permutation == (0, 3, 2, 1)
        assert report.cum_errors == (1, 2, 2, 2)
        assert report.total_errors == 2
        assert report.apfd_percent == 100.0
        assert report.method == "softmax"

    def test_scores_must_cover_all_inputs(self):
        recs = records([0.9, 0.1])
        corr = correctness([False, True, True])
        with pytest.raises(DataError):
            evaluate_prioritization(recs, corr)


class TestSelect:
    def test_fraction_one_is_full_permutation(self):
        recs = records([0.2, 0.8, 0.5])
        assert select_top(recs, fraction=1.0) == [1, 2, 0]

    def test_k_prefix(self):
        recs = records([0.2, 0.8, 0.5, 0.9])
        assert select_top(recs, k=2) == [3, 1]

    def test_fraction_is_exact_decimal(self):
        recs = records(np.linspace(1, 0, 600))
        assert len(select_top(recs, fraction=0.01)) == 6

    def test_fraction_rounds_up(self):
        recs = records([0.1, 0.2, 0.3])
        assert len(select_top(recs, fraction=0.5)) == 2

    def test_bad_arguments(self):
        recs = records([0.1, 0.2])
        with pytest.raises(DataError):
            select_top(recs)
        with pytest.raises(DataError):
            select_top(recs, fraction=0.5, k=1)
        with pytest.raises(DataError):
            select_top(recs, fraction=0.0)
        with pytest.raises(DataError):
            select_top(recs, k=3)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 40))
    def test_prefix_of_ranking(self, seed, n):
        rng = np.random.default_rng(seed)
        scores = rng.normal(size=n)
        recs = records(scores)
        perm = list(rank_by_score(recs))
        k = int(rng.integers(1, n + 1))
        assert select_top(recs, k=k) == perm[:k]


class TestWriters:
    def test_curve_csv_layout(self, tmp_path):
        recs = records([0.9, 0.1, 0.5])
        corr = correctness([False, True, True])
        report = evaluate_prioritization(recs, corr)
        path = tmp_path / "curve.csv"
        write_curve(report, corr, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "rank,input_index,is_error,cum_errors"
        assert lines[1] == "1,0,1,1"
        assert lines[2] == "2,2,0,1"
        assert lines[3] == "3,1,0,1"

    def test_report_json(self, tmp_path):
        recs = records([0.9, 0.1, 0.5])
        corr = correctness([False, True, True])
        report = evaluate_prioritization(recs, corr)
        path = tmp_path / "report.json"
        write_report(report, path)
        doc = json.loads(path.read_text())
        assert doc == {"method": "softmax", "n": 3, "m": 1, "apfd_percent": 100.0}

    def test_indices_round_trip(self, tmp_path):
        path = tmp_path / "sel.csv"
        write_indices([5, 2, 9], path)
        assert read_indices(path) == [5, 2, 9]
        assert path.read_text().splitlines()[0] == "index"
