# evalsuite.py
"""Transfer-task evaluation: retrieval, clustering and NCM classification.

Every task runs over repeated random half splits of one labeled feature
matrix; results are kept in long-format pandas frames.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform
from sklearn.metrics import adjusted_mutual_info_score, adjusted_rand_score, v_measure_score
from sklearn.metrics.cluster import contingency_matrix

from config import DEFAULT_SEED, EVAL_PRECISION_AT, EVAL_REPEATS, EVAL_TASKS, thread_count
from errors import InvalidInputError
from predict import ncm_fit, ncm_predict, top1_accuracy
from utils import format_mean_std

logger = logging.getLogger(__name__)

TASK_METRICS = {
    "retrieval": ["mAP"] + [f"P@{k}" for k in EVAL_PRECISION_AT],
    "cluster": ["AMI", "ARI", "V"],
    "ncm": ["accuracy"],
}


# =============================================================================
# Splits
# =============================================================================
@dataclass(frozen=True)
class SplitPlan:
    seed: int
    n_repeats: int
    train_masks: tuple  # one boolean array per repeat, True = train

    def split(self, repeat):
        mask = self.train_masks[repeat]
        return np.flatnonzero(mask), np.flatnonzero(~mask)


def make_split_plan(n_samples, n_repeats=EVAL_REPEATS, seed=DEFAULT_SEED):
    """Random halves: repeat r permutes with default_rng([seed, r]) and trains on the first n // 2."""
    if n_samples < 2:
        raise InvalidInputError(f"splitting needs at least 2 samples, got {n_samples}")
    if n_repeats < 1:
        raise InvalidInputError(f"n_repeats must be >= 1, got {n_repeats}")
    masks = []
    for r in range(n_repeats):
        perm = np.random.default_rng([seed, r]).permutation(n_samples)
        mask = np.zeros(n_samples, dtype=bool)
        mask[perm[:n_samples // 2]] = True
        masks.append(mask)
    return SplitPlan(seed, n_repeats, tuple(masks))


# =============================================================================
# Retrieval
# =============================================================================
def _tie_keys(n, ids):
    if ids is None:
        return np.arange(n)
    ids = np.asarray(ids)
    if ids.shape[0] != n:
        raise InvalidInputError(f"{ids.shape[0]} ids for {n} gallery rows")
    return np.unique(ids, return_inverse=True)[1]


def rank_gallery(query, gallery, ids=None):
    """
    Gallery row indices by descending dot product with the query.

    Ties are broken by ascending id (by row position when no ids are given).
    """
    gallery = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
    query = np.asarray(query, dtype=np.float64)
    if gallery.shape[0] == 0 or gallery.size == 0:
        raise InvalidInputError("cannot rank an empty gallery")
    if query.shape[-1] != gallery.shape[1]:
        raise InvalidInputError(f"query has dimension {query.shape[-1]}, gallery {gallery.shape[1]}")
    scores = gallery @ query
    return np.lexsort((_tie_keys(gallery.shape[0], ids), -scores))


def average_precision(relevance):
    """
    Mean of precision@k over the ranks k of relevant items.

    Returns nan when nothing is relevant; such queries are left out of mAP.
    """
    rel = np.asarray(relevance, dtype=bool)
    n_relevant = int(rel.sum())
    if n_relevant == 0:
        return float("nan")
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float(np.sum((hits / ranks)[rel]) / n_relevant)


def precision_at(relevance, k):
    rel = np.asarray(relevance, dtype=bool)
    k = min(k, rel.size)
    return float(rel[:k].mean()) if k else float("nan")


def retrieval_eval(test_features, test_labels, train_features, train_labels, ks=EVAL_PRECISION_AT,
                   train_ids=None):
    """
    Every test item queries the training set; relevant = same label.

    Returns:
        dict: {"mAP": ..., "P@k": ...}. mAP averages the queries with at least
        one relevant item; P@k averages all queries.
    """
    test_X = np.atleast_2d(np.asarray(test_features, dtype=np.float64))
    train_X = np.atleast_2d(np.asarray(train_features, dtype=np.float64))
    test_labels = np.asarray(test_labels)
    train_labels = np.asarray(train_labels)
    if test_X.shape[0] != test_labels.shape[0] or train_X.shape[0] != train_labels.shape[0]:
        raise InvalidInputError("feature rows and labels differ in length")
    if test_X.shape[0] == 0:
        raise InvalidInputError("no queries to evaluate")
    aps = []
    precisions = {k: [] for k in ks}
    for query, label in zip(test_X, test_labels):
        order = rank_gallery(query, train_X, train_ids)
        relevance = train_labels[order] == label
        ap = average_precision(relevance)
        if not np.isnan(ap):
            aps.append(ap)
        for k in ks:
            precisions[k].append(precision_at(relevance, k))
    result = {"mAP": float(np.mean(aps)) if aps else float("nan")}
    for k in ks:
        result[f"P@{k}"] = float(np.mean(precisions[k]))
    return result


# =============================================================================
# Clustering
# =============================================================================
def centroid_linkage_cluster(features, K):
    """
    Agglomerative clustering with centroid linkage down to K clusters.

    Cluster distance is the squared Euclidean distance between centroids,
    maintained with the Lance-Williams centroid update. The closest pair is
    merged, ties going to the lexicographically smallest (i, j); the merged
    cluster keeps id i. Labels are numbered by first appearance.
    """
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    n = X.shape[0]
    if K <= 0 or K > n:
        raise InvalidInputError(f"K must lie in [1, {n}], got {K}")
    members = np.arange(n)
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    D = squareform(pdist(X, "sqeuclidean"))
    D[np.tril_indices(n)] = np.inf  # only i < j entries are live
    sizes = np.ones(n)
    last_height = -np.inf
    inversions = 0
    for _ in range(n - K):
        flat = int(np.argmin(D))
        i, j = divmod(flat, n)
        d_ij = D[i, j]
        if d_ij < last_height:
            inversions += 1
        last_height = d_ij
        n_i, n_j = sizes[i], sizes[j]
        total = n_i + n_j
        to_i = np.minimum(D[i, :], D[:, i])
        to_j = np.minimum(D[j, :], D[:, j])
        with np.errstate(invalid="ignore"):
            merged = (n_i * to_i + n_j * to_j) / total - n_i * n_j * d_ij / (total * total)
        merged[~np.isfinite(merged)] = np.inf
        D[:i, i] = merged[:i]
        D[i, i + 1:] = merged[i + 1:]
        D[j, :] = np.inf
        D[:, j] = np.inf
        sizes[i] = total
        sizes[j] = 0
        members[members == j] = i
    if inversions:
        logger.warning("Centroid linkage produced %d non-monotone merges", inversions)
    _, first = np.unique(members, return_index=True)
    relabel = {members[idx]: rank for rank, idx in enumerate(sorted(first))}
    return np.array([relabel[m] for m in members], dtype=np.int64)


def _check_labelings(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"label vectors differ in length: {a.shape[0]} vs {b.shape[0]}")
    if a.size == 0:
        raise InvalidInputError("labelings must not be empty")
    return a, b


def _is_relabeling(a, b):
    """True when the two labelings agree up to renaming of the ids."""
    nonzero = contingency_matrix(a, b) > 0
    return bool(np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1))


def ami(a, b):
    """Adjusted mutual information, normalized by max(H(a), H(b))."""
    a, b = _check_labelings(a, b)
    if _is_relabeling(a, b):
        return 1.0
    return float(adjusted_mutual_info_score(a, b, average_method="max"))


def ari(a, b):
    a, b = _check_labelings(a, b)
    return float(adjusted_rand_score(a, b))


def v_measure(a, b):
    """Harmonic mean of homogeneity and completeness of clustering b w.r.t. classes a."""
    a, b = _check_labelings(a, b)
    if _is_relabeling(a, b):
        return 1.0
    return float(v_measure_score(a, b))


def cluster_eval(features, labels, K=None):
    """Clusters into K (default: number of classes) and scores against the labels."""
    labels = np.asarray(labels)
    K = K or np.unique(labels).size
    clusters = centroid_linkage_cluster(features, K)
    return {"AMI": ami(labels, clusters), "ARI": ari(labels, clusters), "V": v_measure(labels, clusters)}


# =============================================================================
# Classification
# =============================================================================
def ncm_task_eval(train_features, train_labels, test_features, test_labels):
    """Overall accuracy of an NCM classifier fit on the training half."""
    model = ncm_fit(train_features, train_labels)
    return top1_accuracy(ncm_predict(np.atleast_2d(test_features), model), test_labels)


# =============================================================================
# Protocol
# =============================================================================
@dataclass
class Report:
    """Per-split metric values in long format: split, task, metric, value."""
    per_split: pd.DataFrame
    name: str = "features"
    seed: int = DEFAULT_SEED

    def summary(self):
        """Mean and population std of each metric over the splits."""
        grouped = self.per_split.groupby(["task", "metric"], sort=False)["value"]
        return grouped.agg(mean="mean", std=lambda v: float(np.std(v.to_numpy()))).reset_index()

    def to_records(self):
        records = [
            {"feature": self.name, "split": int(row.split), "task": row.task,
             "metric": row.metric, "value": _json_float(row.value)}
            for row in self.per_split.itertuples(index=False)
        ]
        for row in self.summary().itertuples(index=False):
            records.append({"feature": self.name, "split": "mean", "task": row.task,
                            "metric": row.metric, "value": _json_float(row.mean),
                            "std": _json_float(row.std)})
        return records

    def to_jsonl(self):
        return "\n".join(json.dumps(r, sort_keys=True) for r in self.to_records()) + "\n"

    def to_table(self):
        return compare_reports([self]).to_string()


def _json_float(value):
    return None if value is None or pd.isna(value) else float(value)


def compare_reports(reports):
    """Metric x feature table of 'mean ± std' percentages."""
    columns = {}
    for report in reports:
        summary = report.summary()
        columns[report.name] = pd.Series(
            [format_mean_std(m, s) for m, s in zip(summary["mean"], summary["std"])],
            index=[f"{t}/{m}" for t, m in zip(summary["task"], summary["metric"])],
        )
    table = pd.DataFrame(columns)
    table.index.name = "metric"
    return table.fillna("N/A")


def _run_split(X, labels, tasks, train_idx, test_idx, ids):
    rows = {}
    if "retrieval" in tasks:
        rows["retrieval"] = retrieval_eval(
            X[test_idx], labels[test_idx], X[train_idx], labels[train_idx],
            train_ids=None if ids is None else ids[train_idx],
        )
    if "cluster" in tasks:
        rows["cluster"] = cluster_eval(X[train_idx], labels[train_idx])
    if "ncm" in tasks:
        rows["ncm"] = {"accuracy": ncm_task_eval(X[train_idx], labels[train_idx], X[test_idx], labels[test_idx])}
    return rows


def run_protocol(features, labels, tasks=EVAL_TASKS, seed=DEFAULT_SEED, n_repeats=EVAL_REPEATS,
                 ids=None, name="features"):
    """
    Runs the selected tasks on every half split of a SplitPlan.

    Clustering uses the training half with K = number of its classes.
    Splits may run on a thread pool; results are collected in split order.

    Returns:
        Report
    """
    unknown = [t for t in tasks if t not in TASK_METRICS]
    if unknown or not tasks:
        raise InvalidInputError(f"unknown evaluation tasks {unknown}; expected a subset of {list(TASK_METRICS)}")
    X = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != labels.shape[0]:
        raise InvalidInputError(f"features {X.shape} do not match {labels.shape[0]} labels")
    ids = None if ids is None else np.asarray(ids)
    plan = make_split_plan(X.shape[0], n_repeats, seed)

    def job(r):
        train_idx, test_idx = plan.split(r)
        return _run_split(X, labels, tasks, train_idx, test_idx, ids)

    threads = thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(n_repeats)))
    else:
        results = [job(r) for r in range(n_repeats)]

    rows = []
    for r, result in enumerate(results):
        for task in tasks:
            for metric in TASK_METRICS[task]:
                rows.append({"split": r, "task": task, "metric": metric, "value": result[task][metric]})
    logger.info("Evaluated %s on %d splits (%s)", name, n_repeats, ", ".join(tasks))
    return Report(pd.DataFrame(rows, columns=["split", "task", "metric", "value"]), name, seed)
