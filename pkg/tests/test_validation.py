import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score, rand_score

from textgrouprec.validation import (
    ContingencyCounts,
    adjusted_rand_index,
    contingency,
    metrics_report,
    precision_recall_f,
    rand_index,
)

from oracles import ari_bruteforce, pair_counts_bruteforce

# Two clusters of five points; reference classes split 2/3 in the first
# cluster and 3/2 in the second. Pair counts: tp=8, fn=12, fp=12, tn=13.
TEN_POINT_PRED = [1, 1, 1, 1, 1, 2, 2, 2, 2, 2]
TEN_POINT_TRUE = ["s", "s", "t", "t", "t", "s", "s", "s", "t", "t"]


def ten_point_counts():
    return contingency(TEN_POINT_PRED, TEN_POINT_TRUE)


class TestContingency:
    def test_ten_point_example(self):
        c = ten_point_counts()
        assert c.as_tuple() == (8, 12, 12, 13)
        assert c.n == 10

    def test_matches_bruteforce_on_example(self):
        tp, fn, fp, tn = pair_counts_bruteforce(TEN_POINT_PRED, TEN_POINT_TRUE)
        assert (tp, fn, fp, tn) == (8, 12, 12, 13)

    def test_identical_labelings_no_errors(self):
        c = contingency([0, 0, 1, 1], [0, 0, 1, 1])
        assert c.fp == 0 and c.fn == 0
        assert c.tp == 2 and c.tn == 4

    def test_one_cluster_vs_all_distinct(self):
        c = contingency([0, 0, 0], ["a", "b", "c"])
        assert c.as_tuple() == (0, 0, 3, 0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            contingency([0, 1], [0, 1, 2])

    def test_single_point_rejected(self):
        with pytest.raises(ValueError):
            contingency([0], [0])

    def test_pair_sum_invariant_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            pred = rng.integers(0, 4, size=n).tolist()
            true = rng.integers(0, 4, size=n).tolist()
            c = contingency(pred, true)
            assert c.tp + c.fn + c.fp + c.tn == n * (n - 1) // 2
            assert min(c.as_tuple()) >= 0


class TestRandIndex:
    def test_ten_point_example(self):
        assert rand_index(ten_point_counts()) == pytest.approx(21 / 45, abs=1e-12)

    def test_perfect_agreement(self):
        assert rand_index(contingency([0, 0, 1], [0, 0, 1])) == 1.0

    def test_bounded_on_random_labelings(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n = int(rng.integers(2, 25))
            pred = rng.integers(0, 3, size=n).tolist()
            true = rng.integers(0, 3, size=n).tolist()
            assert 0.0 <= rand_index(contingency(pred, true)) <= 1.0

    def test_agrees_with_sklearn(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            n = int(rng.integers(2, 30))
            pred = rng.integers(0, 4, size=n)
            true = rng.integers(0, 4, size=n)
            ours = rand_index(contingency(pred.tolist(), true.tolist()))
            assert ours == pytest.approx(rand_score(true, pred), abs=1e-12)


class TestAdjustedRandIndex:
    def test_ten_point_example(self):
        assert adjusted_rand_index(ten_point_counts()) == pytest.approx(-0.08, abs=1e-9)

    def test_perfect_agreement(self):
        assert adjusted_rand_index(contingency([0, 1, 1], ["b", "a", "a"])) == 1.0

    def test_degenerate_all_singletons(self):
        assert adjusted_rand_index(contingency([0, 1, 2], ["a", "b", "c"])) == 1.0

    def test_one_cluster_vs_all_distinct_is_zero(self):
        assert adjusted_rand_index(contingency([0, 0, 0], ["a", "b", "c"])) == 0.0

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(2, 13))
            pred = rng.integers(0, 4, size=n).tolist()
            true = rng.integers(0, 4, size=n).tolist()
            ours = adjusted_rand_index(contingency(pred, true))
            assert ours == pytest.approx(ari_bruteforce(pred, true), abs=1e-9)

    def test_agrees_with_sklearn(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            n = int(rng.integers(2, 30))
            pred = rng.integers(0, 4, size=n)
            true = rng.integers(0, 4, size=n)
            ours = adjusted_rand_index(contingency(pred.tolist(), true.tolist()))
            assert ours == pytest.approx(adjusted_rand_score(true, pred), abs=1e-12)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            n = int(rng.integers(4, 30))
            pred = rng.integers(0, 4, size=n)
            true = rng.integers(0, 4, size=n)
            base = adjusted_rand_index(contingency(pred.tolist(), true.tolist()))
            perm = rng.permutation(4)
            renamed = [int(perm[p]) for p in pred]
            assert adjusted_rand_index(contingency(renamed, true.tolist())) == base
            assert rand_index(contingency(renamed, true.tolist())) == rand_index(
                contingency(pred.tolist(), true.tolist())
            )

    def test_at_most_one_with_equality_iff_identical(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            n = int(rng.integers(3, 20))
            pred = rng.integers(0, 3, size=n).tolist()
            true = rng.integers(0, 3, size=n).tolist()
            ari = adjusted_rand_index(contingency(pred, true))
            assert ari <= 1.0
            identical = contingency(pred, true).fp == 0 and contingency(pred, true).fn == 0
            assert (ari == 1.0) == identical

    def test_random_labelings_center_near_zero(self):
        rng = np.random.default_rng(31)
        values = []
        for _ in range(1000):
            pred = rng.integers(0, 3, size=30).tolist()
            true = rng.integers(0, 3, size=30).tolist()
            values.append(adjusted_rand_index(contingency(pred, true)))
        assert abs(float(np.mean(values))) < 0.05


class TestPrecisionRecallF:
    def test_ten_point_example_standard(self):
        p, r, f = precision_recall_f(ten_point_counts())
        assert p == 0.4
        assert r == pytest.approx(8 / 20, abs=1e-12)
        assert f == pytest.approx(0.4, abs=1e-12)

    def test_ten_point_example_alt_recall(self):
        p, r, f = precision_recall_f(ten_point_counts(), alt_recall=True)
        assert p == 0.4
        assert r == pytest.approx(8 / 21, abs=1e-12)
        assert f == pytest.approx(2 * 0.4 * (8 / 21) / (0.4 + 8 / 21), abs=1e-12)

    def test_perfect_agreement(self):
        assert precision_recall_f(contingency([0, 0, 1], [0, 0, 1])) == (1.0, 1.0, 1.0)

    def test_zero_denominators(self):
        # all points apart in both labelings: no positive pairs anywhere
        c = ContingencyCounts(tp=0, fn=0, fp=0, tn=3, n=3)
        assert precision_recall_f(c) == (0.0, 0.0, 0.0)


def test_metrics_report_shape():
    report = metrics_report(ten_point_counts())
    assert set(report) == {
        "tp", "fn", "fp", "tn", "rand_index", "ari", "precision", "recall", "f_measure",
    }
    assert report["tp"] == 8 and report["tn"] == 13
    assert report["recall"] == pytest.approx(0.4)
    alt = metrics_report(ten_point_counts(), alt_recall=True)
    assert alt["recall"] == pytest.approx(8 / 21)
