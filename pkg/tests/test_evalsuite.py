import itertools
import math
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

from errors import InvalidInputError
from evalsuite import (
    Report, ami, ari, average_precision, centroid_linkage_cluster, cluster_eval, compare_reports,
    make_split_plan, ncm_task_eval, precision_at, rank_gallery, retrieval_eval, run_protocol, v_measure,
)


def unit_rows(rng, n, d):
    X = rng.normal(size=(n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def blobs(rng, n_classes=3, per_class=8, dim=4, spread=0.05):
    centers = rng.normal(scale=3.0, size=(n_classes, dim))
    labels = np.repeat(np.arange(n_classes), per_class)
    X = centers[labels] + rng.normal(scale=spread, size=(labels.size, dim))
    return X / np.linalg.norm(X, axis=1, keepdims=True), labels


# =============================================================================
# Retrieval
# =============================================================================
class TestRanking:
    def test_query_in_the_gallery_ranks_first(self, rng):
        gallery = unit_rows(rng, 20, 6)
        assert rank_gallery(gallery[13], gallery)[0] == 13

    def test_matches_an_exhaustive_sort(self, rng):
        for _ in range(10):
            gallery = np.round(rng.normal(size=(15, 3)), 1)
            query = np.round(rng.normal(size=3), 1)
            scores = gallery @ query
            expected = sorted(range(15), key=lambda i: (-scores[i], i))
            assert_array_equal(rank_gallery(query, gallery), expected)

    def test_ties_follow_the_ids(self):
        gallery = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert_array_equal(rank_gallery([1.0, 0.0], gallery, ids=["z", "m", "a"]), [1, 0, 2])

    def test_empty_gallery(self):
        with pytest.raises(InvalidInputError):
            rank_gallery([1.0], np.empty((0, 1)))


class TestAveragePrecision:
    def test_all_relevant_first(self):
        assert average_precision([1, 1, 0, 0]) == 1.0

    def test_hand_example(self):
        assert average_precision([1, 0, 1]) == pytest.approx((1 + 2 / 3) / 2)

    @pytest.mark.parametrize("rank", [1, 2, 5, 9])
    def test_single_relevant_item(self, rank):
        relevance = np.zeros(10, dtype=bool)
        relevance[rank - 1] = True
        assert average_precision(relevance) == pytest.approx(1 / rank)

    def test_every_short_sequence(self):
        for length in range(1, 11):
            for relevance in itertools.product((0, 1), repeat=length):
                hits = [k for k, r in enumerate(relevance, start=1) if r]
                if not hits:
                    assert math.isnan(average_precision(relevance))
                    continue
                exact = sum(Fraction(i, k) for i, k in enumerate(hits, start=1)) / len(hits)
                assert average_precision(relevance) == pytest.approx(float(exact), abs=1e-12)

    def test_precision_at_k(self):
        assert precision_at([1, 0, 1, 1, 0, 0], 5) == pytest.approx(0.6)
        assert precision_at([1, 0], 5) == pytest.approx(0.5)


class TestRetrievalEval:
    def test_single_label_everywhere_is_perfect(self, rng):
        result = retrieval_eval(unit_rows(rng, 4, 3), ["x"] * 4, unit_rows(rng, 10, 3), ["x"] * 10)
        assert result == {"mAP": 1.0, "P@1": 1.0, "P@5": 1.0}

    def test_queries_without_relevant_items_leave_map(self):
        train = np.array([[1.0, 0.0], [0.0, 1.0]])
        result = retrieval_eval(np.array([[1.0, 0.0], [0.0, 1.0]]), ["a", "c"], train, ["a", "b"], ks=(1,))
        assert result["mAP"] == 1.0
        assert result["P@1"] == 0.5

    def test_separated_classes(self, rng):
        X, labels = blobs(rng)
        result = retrieval_eval(X[::2], labels[::2], X[1::2], labels[1::2])
        assert result["mAP"] > 0.99

    @pytest.mark.parametrize("scale", [0.5, 8.0])
    def test_positive_scaling_of_all_features(self, rng, scale):
        X, labels = blobs(rng, spread=1.0)
        base = retrieval_eval(X[::2], labels[::2], X[1::2], labels[1::2])
        assert retrieval_eval(scale * X[::2], labels[::2], scale * X[1::2], labels[1::2]) == base


# =============================================================================
# Clustering
# =============================================================================
class TestLinkage:
    def test_collinear_points(self):
        assert_array_equal(centroid_linkage_cluster(np.array([[0.0], [1.0], [10.0], [11.0]]), 2), [0, 0, 1, 1])

    def test_one_cluster_per_point(self, rng):
        assert_array_equal(centroid_linkage_cluster(rng.normal(size=(6, 2)), 6), np.arange(6))

    def test_everything_in_one_cluster(self, rng):
        assert_array_equal(centroid_linkage_cluster(rng.normal(size=(6, 2)), 1), np.zeros(6))

    def test_two_blobs_match_the_best_two_partition(self, rng):
        X = np.vstack([rng.normal(0.0, 0.3, size=(5, 2)), rng.normal(5.0, 0.3, size=(4, 2))])
        labels = centroid_linkage_cluster(X, 2)
        best, best_cost = None, np.inf
        for mask in range(1, 2 ** (len(X) - 1)):
            side = np.array([(mask >> i) & 1 for i in range(len(X))], dtype=bool)
            cost = sum(np.sum((X[s] - X[s].mean(axis=0)) ** 2) for s in (side, ~side))
            if cost < best_cost:
                best, best_cost = side, cost
        assert ami(labels, best.astype(int)) == 1.0

    def test_labels_numbered_by_first_appearance(self):
        X = np.array([[10.0], [0.0], [10.5], [0.5]])
        assert_array_equal(centroid_linkage_cluster(X, 2), [0, 1, 0, 1])

    def test_row_order_does_not_change_the_partition(self, rng):
        X = rng.normal(size=(12, 3))
        order = rng.permutation(12)
        labels = centroid_linkage_cluster(X, 4)
        shuffled = centroid_linkage_cluster(X[order], 4)
        assert ami(labels[order], shuffled) == 1.0

    @pytest.mark.parametrize("K", [0, 5])
    def test_invalid_cluster_count(self, K):
        with pytest.raises(InvalidInputError):
            centroid_linkage_cluster(np.zeros((4, 2)), K)


def direct_ami(a, b):
    """AMI with the expected MI summed exactly over hypergeometric probabilities."""
    _, a_idx = np.unique(a, return_inverse=True)
    _, b_idx = np.unique(b, return_inverse=True)
    counts = np.zeros((a_idx.max() + 1, b_idx.max() + 1), dtype=np.int64)
    np.add.at(counts, (a_idx, b_idx), 1)
    n = int(counts.sum())
    rows = [int(v) for v in counts.sum(axis=1)]
    cols = [int(v) for v in counts.sum(axis=0)]
    emi = 0.0
    for ai in rows:
        for bj in cols:
            for nij in range(max(1, ai + bj - n), min(ai, bj) + 1):
                prob = Fraction(math.comb(ai, nij) * math.comb(n - ai, bj - nij), math.comb(n, bj))
                emi += nij / n * math.log(n * nij / (ai * bj)) * float(prob)
    mi = math.fsum(c / n * math.log(n * c / (rows[i] * cols[j]))
                   for (i, j), c in np.ndenumerate(counts) if c > 0)
    entropy = lambda sums: -math.fsum(s / n * math.log(s / n) for s in sums)
    return (mi - emi) / (max(entropy(rows), entropy(cols)) - emi)


class TestPartitionScores:
    def test_identical_partitions(self):
        a = [0, 0, 1, 1, 2, 2, 2]
        assert ami(a, a) == 1.0 and ari(a, a) == 1.0 and v_measure(a, a) == 1.0

    def test_relabeled_partitions(self):
        a = [0, 0, 1, 1, 2, 2, 2]
        b = ["z", "z", "x", "x", "y", "y", "y"]
        assert ami(a, b) == 1.0 and ari(a, b) == 1.0 and v_measure(a, b) == 1.0

    def test_independent_labelings_score_near_zero(self):
        amis, aris = [], []
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a, b = rng.integers(3, size=300), rng.integers(3, size=300)
            amis.append(ami(a, b))
            aris.append(ari(a, b))
        assert abs(np.mean(amis)) < 0.05
        assert abs(np.mean(aris)) < 0.05

    @pytest.mark.parametrize("a, b", [
        ([0, 0, 0, 1, 1, 1, 2, 2, 2, 2], [0, 0, 1, 1, 1, 2, 2, 0, 1, 2]),
        ([0, 0, 1, 1, 1, 1, 2, 2], [1, 1, 1, 0, 0, 0, 0, 1]),
        ([0, 1, 2, 0, 1, 2, 0, 1, 2, 3, 3, 3], [0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2, 0]),
    ])
    def test_ami_matches_the_direct_summation(self, a, b):
        assert ami(a, b) == pytest.approx(direct_ami(a, b), abs=1e-9)

    def test_scores_are_symmetric(self, rng):
        for _ in range(20):
            a, b = rng.integers(4, size=40), rng.integers(3, size=40)
            assert ami(a, b) == pytest.approx(ami(b, a), abs=1e-12)
            assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-12)

    def test_scores_ignore_cluster_names(self, rng):
        a, b = rng.integers(4, size=60), rng.integers(5, size=60)
        renamed = np.array(["e", "c", "a", "d", "b"])[b]
        assert ami(a, renamed) == pytest.approx(ami(a, b), abs=1e-12)
        assert ari(a, renamed) == pytest.approx(ari(a, b), abs=1e-12)

    def test_ari_textbook_example(self):
        a = [0, 0, 0, 1, 1, 1]
        b = [0, 0, 1, 1, 2, 2]
        assert ari(a, b) == pytest.approx(0.24242424242424246)

    def test_v_measure_of_a_split_cluster(self):
        # homogeneity 1, completeness 1 - H(b|a)/H(b)
        a = [0, 0, 1, 1]
        b = [0, 1, 2, 2]
        h_b = -(0.25 * math.log(0.25) * 2 + 0.5 * math.log(0.5))
        completeness = 1 - (0.5 * math.log(2)) / h_b
        assert v_measure(a, b) == pytest.approx(2 * completeness / (1 + completeness))

    def test_label_vectors_must_match(self):
        with pytest.raises(InvalidInputError):
            ami([0, 1], [0, 1, 1])

    def test_cluster_eval_on_blobs(self, rng):
        X, labels = blobs(rng)
        assert cluster_eval(X, labels) == {"AMI": 1.0, "ARI": 1.0, "V": 1.0}


# =============================================================================
# Classification and protocol
# =============================================================================
def test_ncm_on_singleton_classes(rng):
    X = rng.normal(size=(5, 3))
    assert ncm_task_eval(X, list("abcde"), X, list("abcde")) == 1.0


class TestSplits:
    def test_halves_are_disjoint_and_complete(self):
        plan = make_split_plan(11, 3, seed=4)
        for r in range(3):
            train, test = plan.split(r)
            assert len(train) == 5
            assert sorted(np.concatenate([train, test])) == list(range(11))

    def test_seeded(self):
        a, b = make_split_plan(20, 2, seed=9), make_split_plan(20, 2, seed=9)
        for ma, mb in zip(a.train_masks, b.train_masks):
            assert_array_equal(ma, mb)

    def test_repeats_differ(self):
        plan = make_split_plan(40, 2, seed=0)
        assert not np.array_equal(plan.train_masks[0], plan.train_masks[1])


class TestProtocol:
    def test_report_layout(self, rng):
        X, labels = blobs(rng, per_class=20)
        report = run_protocol(X, labels, seed=1, n_repeats=3, name="blobs")
        assert len(report.per_split) == 3 * 6
        assert list(report.per_split.columns) == ["split", "task", "metric", "value"]
        summary = report.summary()
        assert len(summary) == 6
        assert np.all(summary["mean"] > 0.99)

    def test_single_split_has_zero_spread(self, rng):
        X, labels = blobs(rng)
        summary = run_protocol(X, labels, ("ncm",), n_repeats=1).summary()
        assert summary.loc[0, "std"] == 0.0

    def test_threads_do_not_change_the_report(self, rng, monkeypatch):
        X, labels = blobs(rng, spread=1.0)
        serial = run_protocol(X, labels, seed=2, n_repeats=4)
        monkeypatch.delenv("DOCREP_DETERMINISTIC")
        monkeypatch.setenv("DOCREP_THREADS", "3")
        pooled = run_protocol(X, labels, seed=2, n_repeats=4)
        pd.testing.assert_frame_equal(serial.per_split, pooled.per_split)

    def test_records_and_jsonl(self, rng):
        X, labels = blobs(rng)
        report = run_protocol(X, labels, ("ncm",), n_repeats=2, name="f")
        records = report.to_records()
        assert [r["split"] for r in records] == [0, 1, "mean"]
        assert records[-1]["std"] == 0.0
        assert report.to_jsonl().count("\n") == 3

    def test_comparison_table(self):
        frame = pd.DataFrame({"split": [0, 1], "task": ["ncm", "ncm"], "metric": ["accuracy"] * 2,
                              "value": [0.8, 0.9]})
        table = compare_reports([Report(frame, "rl"), Report(frame.assign(value=[1.0, 1.0]), "fv16")])
        assert table.loc["ncm/accuracy", "rl"] == "85.0 ± 5.0"
        assert table.loc["ncm/accuracy", "fv16"] == "100.0 ± 0.0"

    def test_unknown_task(self, rng):
        with pytest.raises(InvalidInputError):
            run_protocol(rng.normal(size=(4, 2)), [0, 0, 1, 1], ("ranking",))
