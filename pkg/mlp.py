# mlp.py
"""Fully connected network trained on top of shallow page descriptors.

Weights are stored as (out, in) matrices. Dropout is inverted dropout on the
input of every fully connected layer and only active in train mode.
"""
import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from config import (
    DEFAULT_SEED, MLP_ACTIVATION_LAYER, MLP_BATCH_SIZE, MLP_DROPOUT, MLP_EPOCHS,
    MLP_HIDDEN_LAYERS, MLP_HIDDEN_WIDTH, MLP_LEARNING_RATE, MLP_LR_DECAY,
    MLP_LR_STEP_EPOCHS, MLP_MOMENTUM,
)
from errors import InvalidInputError, NumericalError
from linalg import l2_normalize

logger = logging.getLogger(__name__)

MODES = ("train", "eval")


@dataclass(frozen=True)
class MLPModel:
    weights: tuple   # W_1..W_L, each (out, in)
    biases: tuple    # b_1..b_L
    dropout_rate: float = 0.0
    classes: tuple = field(default=None)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise InvalidInputError("an MLP needs one bias per weight matrix and at least one layer")
        for i in range(1, len(self.weights)):
            if self.weights[i].shape[1] != self.weights[i - 1].shape[0]:
                raise InvalidInputError(f"layer {i + 1} input width does not match layer {i} output")
        for W, b in zip(self.weights, self.biases):
            if b.shape != (W.shape[0],):
                raise InvalidInputError(f"bias shape {b.shape} does not match weight shape {W.shape}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")
        if self.n_classes < 2:
            raise InvalidInputError("an MLP classifier needs at least 2 outputs")
        if self.classes is None:
            object.__setattr__(self, "classes", tuple(range(self.n_classes)))
        elif len(self.classes) != self.n_classes:
            raise InvalidInputError(f"{len(self.classes)} class names for {self.n_classes} outputs")

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def n_classes(self):
        return self.weights[-1].shape[0]

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def hidden_width(self):
        return self.weights[0].shape[0] if self.n_layers > 1 else 0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = MLP_LEARNING_RATE
    lr_decay: float = MLP_LR_DECAY
    lr_step_epochs: int = MLP_LR_STEP_EPOCHS
    momentum: float = MLP_MOMENTUM
    batch_size: int = MLP_BATCH_SIZE
    epochs: int = MLP_EPOCHS
    dropout_rate: float = MLP_DROPOUT
    seed: int = DEFAULT_SEED
    hidden_width: int = MLP_HIDDEN_WIDTH
    hidden_layers: int = MLP_HIDDEN_LAYERS

    def __post_init__(self):
        positives = {
            "learning_rate": self.learning_rate, "lr_decay": self.lr_decay,
            "lr_step_epochs": self.lr_step_epochs, "batch_size": self.batch_size,
            "epochs": self.epochs, "hidden_width": self.hidden_width,
        }
        for name, value in positives.items():
            if value <= 0:
                raise InvalidInputError(f"{name} must be positive, got {value}")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")
        if self.hidden_layers < 0:
            raise InvalidInputError(f"hidden layer count must be >= 0, got {self.hidden_layers}")

    def learning_rate_at(self, epoch):
        """Step decay: multiplied by lr_decay every lr_step_epochs epochs."""
        return self.learning_rate * self.lr_decay ** (epoch // self.lr_step_epochs)


def init_mlp(input_dim, n_classes, hidden_width=MLP_HIDDEN_WIDTH, hidden_layers=MLP_HIDDEN_LAYERS,
             dropout_rate=MLP_DROPOUT, seed=DEFAULT_SEED, classes=None, rng=None):
    """Uniform +-sqrt(6 / (fan_in + fan_out)) weights and zero biases."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    widths = [input_dim] + [hidden_width] * hidden_layers + [n_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPModel(tuple(weights), tuple(biases), dropout_rate,
                    tuple(classes) if classes is not None else None)


# =============================================================================
# Forward / loss / backward
# =============================================================================
def _as_batch(x, model):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.input_dim:
        raise InvalidInputError(f"MLP expects input dimension {model.input_dim}, got {X.shape[1]}")
    return X, single


def _forward(X, model, rng):
    """Logits plus the per-layer tensors backprop needs; rng=None means eval mode."""
    layer_inputs, masks, hidden = [], [], []
    a = X
    p = model.dropout_rate
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        mask = None
        if rng is not None and p > 0:
            mask = (rng.random(a.shape) >= p) / (1.0 - p)
            a = a * mask
        layer_inputs.append(a)
        masks.append(mask)
        z = a @ W.T + b
        if i < model.n_layers - 1:
            a = np.maximum(z, 0.0)
            hidden.append(a)
        else:
            a = z
    return a, hidden, layer_inputs, masks


def forward(x, model, mode="eval", seed=None, rng=None):
    """
    Runs the network on one input vector or a batch of rows.

    Args:
        x (np.ndarray): (input_dim,) or (n, input_dim).
        model (MLPModel): The network.
        mode (str): "train" applies inverted dropout; "eval" applies none.
        seed (int | None): Seeds the dropout masks in train mode when no rng is given.
        rng (np.random.Generator | None): Mask source in train mode.

    Returns:
        tuple: (logits, list of post-ReLU hidden activations).
    """
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")
    X, single = _as_batch(x, model)
    if mode == "train":
        rng = rng if rng is not None else np.random.default_rng(seed)
    else:
        rng = None
    logits, hidden, _, _ = _forward(X, model, rng)
    if single:
        return logits[0], [h[0] for h in hidden]
    return logits, hidden


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True)


def _log_softmax(logits):
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax_cross_entropy(logits, label):
    """-log softmax(logits)[label]; the mean over rows for a batch."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(label, dtype=np.int64)
    n_classes = logits.shape[-1]
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise InvalidInputError(f"labels must lie in [0, {n_classes})")
    if logits.ndim == 1:
        return float(-_log_softmax(logits)[int(labels)])
    log_probs = _log_softmax(logits)
    return float(-np.mean(log_probs[np.arange(logits.shape[0]), labels]))


def loss_and_gradients(X, y, model, rng=None):
    """
    Mean cross-entropy of a batch and its exact gradients.

    Returns:
        tuple: (loss, weight gradients, bias gradients), gradients in layer order.
    """
    X, _ = _as_batch(X, model)
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise InvalidInputError(f"batch has {X.shape[0]} rows and {y.shape[0]} labels")
    logits, hidden, layer_inputs, masks = _forward(X, model, rng)
    loss = softmax_cross_entropy(logits, y)

    delta = softmax(logits)
    delta[np.arange(X.shape[0]), y] -= 1.0
    delta /= X.shape[0]
    grad_w = [None] * model.n_layers
    grad_b = [None] * model.n_layers
    for i in range(model.n_layers - 1, -1, -1):
        grad_w[i] = delta.T @ layer_inputs[i]
        grad_b[i] = delta.sum(axis=0)
        if i == 0:
            break
        upstream = delta @ model.weights[i]
        if masks[i] is not None:
            upstream = upstream * masks[i]
        delta = upstream * (hidden[i - 1] > 0)
    return loss, grad_w, grad_b


def backward_sgd_step(batch, model, config, velocity=None, learning_rate=None, rng=None):
    """
    One momentum SGD step on a mini-batch: v <- m*v - lr*g; W <- W + v.

    Args:
        batch (tuple): (X, y) with y holding class indices.
        model (MLPModel): Current parameters.
        config (TrainConfig): Momentum and base learning rate.
        velocity (list | None): Velocities from the previous step, zeros if None.
        learning_rate (float | None): Overrides config.learning_rate (schedules).
        rng (np.random.Generator | None): Dropout mask source; seeded from config.seed if None.

    Returns:
        tuple: (updated model, batch loss, velocity)
    """
    X, y = batch
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    lr = config.learning_rate if learning_rate is None else learning_rate
    loss, grad_w, grad_b = loss_and_gradients(X, y, model, rng if model.dropout_rate > 0 else None)
    grads = grad_w + grad_b
    if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericalError(f"non-finite loss or gradient (loss={loss}, lr={lr})")
    params = list(model.weights) + list(model.biases)
    if velocity is None:
        velocity = [np.zeros_like(p) for p in params]
    velocity = [config.momentum * v - lr * g for v, g in zip(velocity, grads)]
    params = [p + v for p, v in zip(params, velocity)]
    n = model.n_layers
    updated = MLPModel(tuple(params[:n]), tuple(params[n:]), model.dropout_rate, model.classes)
    return updated, loss, velocity


# =============================================================================
# Training
# =============================================================================
def _encode_labels(labels, classes):
    labels = np.asarray(labels)
    if classes is None:
        classes = tuple(np.unique(labels).tolist())
    else:
        classes = tuple(classes)
        counts = pd.Series(labels).value_counts()
        missing = [c for c in classes if counts.get(c, 0) == 0]
        if missing:
            raise InvalidInputError(f"classes without training samples: {missing}")
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        encoded = np.array([lookup[v] for v in labels.tolist()], dtype=np.int64)
    except KeyError as e:
        raise InvalidInputError(f"label {e.args[0]!r} is not one of the declared classes") from e
    return encoded, classes


def _accuracy(model, X, y_idx):
    logits, _ = forward(X, model, "eval")
    return float(np.mean(np.argmax(np.atleast_2d(logits), axis=1) == y_idx))


def train(features, labels, config=None, validation=None, classes=None):
    """
    Trains an MLP by momentum SGD over seeded shuffled mini-batches.

    Args:
        features (np.ndarray): (n, d) training inputs.
        labels (array-like): n class labels (any sortable type).
        config (TrainConfig | None): Hyperparameters.
        validation (tuple | None): (features, labels) used to keep the best epoch.
        classes (sequence | None): Declared class list; each must have samples.

    Returns:
        MLPModel: Best-validation model if a validation split is given, else the final one.
    """
    config = config or TrainConfig()
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInputError(f"training features must be a non-empty (n, d) matrix, got {X.shape}")
    y, classes = _encode_labels(labels, classes)
    if len(classes) < 2:
        raise InvalidInputError("training an MLP needs at least 2 classes")
    if y.shape[0] != X.shape[0]:
        raise InvalidInputError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    val = None
    if validation is not None:
        val_y, _ = _encode_labels(validation[1], classes)
        val = (np.asarray(validation[0], dtype=np.float64), val_y)

    rng = np.random.default_rng(config.seed)
    model = init_mlp(X.shape[1], len(classes), config.hidden_width, config.hidden_layers,
                     config.dropout_rate, classes=classes, rng=rng)
    velocity = None
    best_model, best_acc = model, -1.0
    for epoch in range(config.epochs):
        lr = config.learning_rate_at(epoch)
        order = rng.permutation(X.shape[0])
        losses = []
        for start in range(0, X.shape[0], config.batch_size):
            idx = order[start:start + config.batch_size]
            model, loss, velocity = backward_sgd_step((X[idx], y[idx]), model, config, velocity, lr, rng)
            losses.append(loss)
        if val is not None:
            acc = _accuracy(model, *val)
            if acc > best_acc:
                best_model, best_acc = model, acc
            logger.debug("epoch %d: lr %.4g loss %.5f val acc %.4f", epoch, lr, np.mean(losses), acc)
        else:
            logger.debug("epoch %d: lr %.4g loss %.5f", epoch, lr, np.mean(losses))
    if val is not None:
        logger.info("MLP best validation accuracy %.4f", best_acc)
        return best_model
    return model


def predict_mlp(x, model):
    """Top-1 class label of one input or of each row."""
    logits, _ = forward(x, model, "eval")
    idx = np.argmax(np.atleast_2d(logits), axis=1)
    labels = [model.classes[i] for i in idx]
    return labels[0] if np.ndim(x) == 1 else labels


def extract_activation(x, model, layer_index=MLP_ACTIVATION_LAYER):
    """L2-normalized post-ReLU output of hidden layer `layer_index` (1-based), eval mode."""
    if not 1 <= layer_index <= model.n_layers - 1:
        raise InvalidInputError(
            f"layer index must lie in [1, {model.n_layers - 1}], got {layer_index}"
        )
    _, hidden = forward(x, model, "eval")
    return l2_normalize(hidden[layer_index - 1])


def grid_search(train_set, validation, grid, base_config=None, classes=None):
    """
    Exhaustive search over TrainConfig fields, scored by validation accuracy.

    Args:
        train_set (tuple): (features, labels).
        validation (tuple): (features, labels).
        grid (dict): TrainConfig field name -> list of candidate values.

    Returns:
        tuple: (best config, best model, pandas DataFrame with one row per candidate).
    """
    base_config = base_config or TrainConfig()
    names = sorted(grid)
    rows = []
    best = (None, None, -1.0)
    val_X = np.asarray(validation[0], dtype=np.float64)
    for values in itertools.product(*(grid[name] for name in names)):
        candidate = replace(base_config, **dict(zip(names, values)))
        model = train(train_set[0], train_set[1], candidate, validation, classes)
        val_idx, _ = _encode_labels(validation[1], model.classes)
        acc = _accuracy(model, val_X, val_idx)
        rows.append({**dict(zip(names, values)), "val_accuracy": acc})
        if acc > best[2]:
            best = (candidate, model, acc)
    return best[0], best[1], pd.DataFrame(rows)
