# predict.py
"""Task-time predictors over fixed features: one-vs-rest linear SVM and NCM."""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from config import DEFAULT_SEED, SVM_EPOCHS, SVM_LAMBDA, SVM_LAMBDA_GRID
from errors import InvalidInputError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearSVMModel:
    weights: np.ndarray  # (C, d)
    biases: np.ndarray   # (C,)
    lam: float
    classes: tuple

    @property
    def dim(self):
        return self.weights.shape[1]


@dataclass(frozen=True)
class NCMModel:
    centroids: np.ndarray  # (C, d)
    classes: tuple

    @property
    def dim(self):
        return self.centroids.shape[1]


def _check_training_set(features, labels):
    X = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError(f"features must be a non-empty (n, d) matrix, got shape {X.shape}")
    if labels.shape[0] != X.shape[0]:
        raise InvalidInputError(f"{X.shape[0]} feature rows but {labels.shape[0]} labels")
    classes = tuple(np.unique(labels).tolist())
    lookup = {c: i for i, c in enumerate(classes)}
    y = np.array([lookup[v] for v in labels.tolist()], dtype=np.int64)
    return X, y, classes


def _as_rows(x, dim):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != dim:
        raise InvalidInputError(f"model expects dimension {dim}, got {X.shape[1]}")
    return X, single


def _pick(model, idx, single):
    labels = [model.classes[i] for i in idx]
    return labels[0] if single else labels


# =============================================================================
# Linear SVM
# =============================================================================
def train_linear_svm(features, labels, lam=SVM_LAMBDA, epochs=SVM_EPOCHS, seed=DEFAULT_SEED):
    """
    One-vs-rest linear SVMs by stochastic subgradient descent on the hinge loss.

    Each class minimizes lam/2 ||w||^2 + mean(max(0, 1 - y (w.x + b))) with
    y = +1 for the class and -1 otherwise. All classes share the sample
    order and are updated together. The step size is 1 / (lam (t + t0))
    with t0 = 1 / lam, the bias is not regularized, and the returned
    parameters are the average of the iterates over the last half of
    training.
    """
    X, y, classes = _check_training_set(features, labels)
    if len(classes) < 2:
        raise InvalidInputError("a linear SVM needs at least 2 classes")
    if lam <= 0 or epochs < 1:
        raise InvalidInputError(f"need lam > 0 and epochs >= 1, got lam={lam}, epochs={epochs}")
    n, dim = X.shape
    n_classes = len(classes)
    targets = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)

    rng = np.random.default_rng(seed)
    W = np.zeros((n_classes, dim))
    b = np.zeros(n_classes)
    W_avg = np.zeros_like(W)
    b_avg = np.zeros_like(b)
    total_steps = epochs * n
    average_from = total_steps // 2
    t0 = 1.0 / lam
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            eta = 1.0 / (lam * (t + t0))
            x = X[i]
            margin_target = targets[i]
            violated = margin_target * (W @ x + b) < 1.0
            W *= 1.0 - eta * lam
            if np.any(violated):
                step = eta * margin_target * violated
                W += step[:, None] * x[None, :]
                b += step
            t += 1
            if t > average_from:
                k = t - average_from
                W_avg += (W - W_avg) / k
                b_avg += (b - b_avg) / k
    if not (np.all(np.isfinite(W_avg)) and np.all(np.isfinite(b_avg))):
        raise NumericalError("SVM training produced non-finite weights")
    logger.debug("SVM trained: %d classes, %d dims, lam=%g, %d steps", n_classes, dim, lam, total_steps)
    return LinearSVMModel(W_avg, b_avg, float(lam), classes)


def svm_scores(x, model):
    X, single = _as_rows(x, model.dim)
    scores = X @ model.weights.T + model.biases
    return scores[0] if single else scores


def svm_predict(x, model):
    """Class with the highest score w_c.x + b_c; ties go to the lowest class index."""
    X, single = _as_rows(x, model.dim)
    idx = np.argmax(X @ model.weights.T + model.biases, axis=1)
    return _pick(model, idx, single)


def svm_objective(model, features, labels):
    """Per-class primal objectives lam/2 ||w||^2 + mean hinge, summed over classes."""
    X, y, classes = _check_training_set(features, labels)
    lookup = {c: i for i, c in enumerate(model.classes)}
    cols = np.array([lookup[c] for c in classes])
    targets = np.where(cols[y][:, None] == np.arange(len(model.classes))[None, :], 1.0, -1.0)
    hinge = np.maximum(0.0, 1.0 - targets * (X @ model.weights.T + model.biases))
    reg = 0.5 * model.lam * np.sum(model.weights * model.weights, axis=1)
    return float(np.sum(reg + hinge.mean(axis=0)))


def select_svm_lambda(train_set, validation, grid=SVM_LAMBDA_GRID, epochs=SVM_EPOCHS, seed=DEFAULT_SEED):
    """
    Picks lam from `grid` by validation accuracy (ties keep the smaller lam).

    Returns:
        tuple: (best lam, model trained with it, DataFrame of lam vs accuracy)
    """
    rows = []
    best_lam, best_model, best_acc = None, None, -1.0
    for lam in sorted(grid):
        model = train_linear_svm(train_set[0], train_set[1], lam, epochs, seed)
        acc = top1_accuracy(svm_predict(validation[0], model), validation[1])
        rows.append({"lam": lam, "val_accuracy": acc})
        if acc > best_acc:
            best_lam, best_model, best_acc = lam, model, acc
    logger.info("Selected SVM lam=%g (validation accuracy %.4f)", best_lam, best_acc)
    return best_lam, best_model, pd.DataFrame(rows)


# =============================================================================
# Nearest Class Mean
# =============================================================================
def ncm_fit(features, labels):
    """Per-class arithmetic mean of the training features, classes in sorted order."""
    X, y, classes = _check_training_set(features, labels)
    counts = np.bincount(y, minlength=len(classes))
    centroids = np.zeros((len(classes), X.shape[1]))
    np.add.at(centroids, y, X)
    centroids /= counts[:, None]
    return NCMModel(centroids, classes)


def ncm_distances(x, model):
    """Squared Euclidean distances to every centroid, (n, C)."""
    X, _ = _as_rows(x, model.dim)
    out = np.empty((X.shape[0], model.centroids.shape[0]))
    for c, centroid in enumerate(model.centroids):
        diff = X - centroid
        out[:, c] = np.einsum("ij,ij->i", diff, diff)
    return out


def ncm_predict(x, model):
    """Class of the nearest centroid; ties go to the lowest class index."""
    single = np.ndim(x) == 1
    idx = np.argmin(ncm_distances(x, model), axis=1)
    return _pick(model, idx, single)


def top1_accuracy(predicted, truth):
    """Fraction of predictions equal to the ground-truth labels."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidInputError(f"{predicted.shape[0]} predictions for {truth.shape[0]} labels")
    if truth.size == 0:
        raise InvalidInputError("accuracy of an empty set is undefined")
    return float(np.mean(predicted == truth))
