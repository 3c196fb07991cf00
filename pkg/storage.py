# storage.py
"""Binary feature and model files.

FeatureSet file ("DFS1"):
    header  '<4sHQII'  magic, version, n, d, flags
    body    n * d little-endian float32, row-major
    trailer u64 length + UTF-8 JSON {"ids", "labels", "metadata"}

Model file ("DMD1"):
    header  '<4sH8sI'  magic, version, type tag (NUL padded), array count
    arrays  each: u8 ndim, ndim x u64 shape, then little-endian float64 data
    trailer u64 length + UTF-8 JSON metadata
"""
import hashlib
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from errors import DataError, FormatError, InvalidInputError
from gmm import DiagonalGMM
from linalg import PCAModel
from mlp import MLPModel
from predict import LinearSVMModel, NCMModel

logger = logging.getLogger(__name__)

FEATURESET_MAGIC = b"DFS1"
MODEL_MAGIC = b"DMD1"
FORMAT_VERSION = 1
FEATURESET_HEADER = struct.Struct("<4sHQII")
MODEL_HEADER = struct.Struct("<4sH8sI")
LENGTH = struct.Struct("<Q")
FLAG_LABELS = 1

MODEL_TAGS = ("pca", "gmm", "svm", "ncm", "mlp")


@dataclass(frozen=True)
class FeatureSet:
    ids: tuple
    matrix: np.ndarray  # (n, d) float32
    labels: tuple = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float32)
        if matrix.ndim != 2:
            raise InvalidInputError(f"feature matrix must be 2-D, got shape {matrix.shape}")
        ids = tuple(str(i) for i in self.ids)
        if len(ids) != matrix.shape[0]:
            raise InvalidInputError(f"{len(ids)} ids for {matrix.shape[0]} feature rows")
        if len(set(ids)) != len(ids):
            raise InvalidInputError("feature ids must be unique")
        if self.labels is not None and len(self.labels) != len(ids):
            raise InvalidInputError(f"{len(self.labels)} labels for {len(ids)} feature rows")
        if not np.all(np.isfinite(matrix)):
            raise InvalidInputError("feature matrix contains non-finite values")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "ids", ids)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def dim(self):
        return self.matrix.shape[1]

    @property
    def descriptor(self):
        return self.metadata.get("descriptor")

    @property
    def config_hash(self):
        return self.metadata.get("config_hash")

    def subset(self, rows):
        """New FeatureSet with the given row indices, metadata shared."""
        rows = np.asarray(rows, dtype=np.int64)
        labels = None if self.labels is None else [self.labels[i] for i in rows]
        return FeatureSet([self.ids[i] for i in rows], self.matrix[rows], labels, dict(self.metadata))


# =============================================================================
# Low-level helpers
# =============================================================================
def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except FileNotFoundError as e:
        raise DataError(f"File not found: '{path}'") from e
    except OSError as e:
        raise DataError(f"Cannot read '{path}': {e}") from e


def _write_bytes(path, payload):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(payload)
    except OSError as e:
        raise DataError(f"Cannot write '{path}': {e}") from e


def write_text(path, text):
    """Writes a UTF-8 text artifact (reports, predictions, error lists)."""
    _write_bytes(path, text.encode("utf-8"))


def _unpack(fmt, buffer, offset, what):
    if offset + fmt.size > len(buffer):
        raise FormatError(f"truncated file while reading {what}", offset)
    return fmt.unpack_from(buffer, offset), offset + fmt.size


def _trailer(payload):
    body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return LENGTH.pack(len(body)) + body


def _read_trailer(buffer, offset):
    (length,), offset = _unpack(LENGTH, buffer, offset, "trailer length")
    if offset + length > len(buffer):
        raise FormatError(f"trailer declares {length} bytes but the file ends early", offset - LENGTH.size)
    try:
        payload = json.loads(buffer[offset:offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"malformed JSON trailer: {e}", offset) from e
    if offset + length != len(buffer):
        raise FormatError(f"{len(buffer) - offset - length} unexpected bytes after the trailer", offset + length)
    if not isinstance(payload, dict):
        raise FormatError("trailer is not a JSON object", offset)
    return payload


def _check_magic(buffer, magic, path):
    if buffer[:4] != magic:
        raise FormatError(f"'{path}' is not a {magic.decode()} file (magic {buffer[:4]!r})", 0)


# =============================================================================
# FeatureSet
# =============================================================================
def featureset_bytes(fs):
    flags = FLAG_LABELS if fs.labels is not None else 0
    header = FEATURESET_HEADER.pack(FEATURESET_MAGIC, FORMAT_VERSION, fs.n, fs.dim, flags)
    body = np.ascontiguousarray(fs.matrix, dtype="<f4").tobytes()
    trailer = _trailer({
        "ids": list(fs.ids),
        "labels": None if fs.labels is None else list(fs.labels),
        "metadata": fs.metadata,
    })
    return header + body + trailer


def save_featureset(path, fs):
    _write_bytes(path, featureset_bytes(fs))
    logger.info("Wrote %d x %d features to %s", fs.n, fs.dim, path)


def load_featureset(path, expected_dim=None):
    """Reads and validates a FeatureSet file; `expected_dim` rejects a dim mismatch."""
    buffer = _read_bytes(path)
    _check_magic(buffer, FEATURESET_MAGIC, path)
    (_, version, n, d, flags), offset = _unpack(FEATURESET_HEADER, buffer, 0, "header")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported FeatureSet version {version}", 4)
    if expected_dim is not None and d != expected_dim:
        raise FormatError(f"feature dimension {d} does not match the expected {expected_dim}", 14)
    n_bytes = n * d * 4
    if offset + n_bytes > len(buffer):
        raise FormatError(f"matrix of {n} x {d} floats is truncated", offset)
    matrix = np.frombuffer(buffer, dtype="<f4", count=n * d, offset=offset).reshape(n, d).astype(np.float32)
    trailer_offset = offset + n_bytes
    payload = _read_trailer(buffer, trailer_offset)
    ids = payload.get("ids")
    if not isinstance(ids, list) or len(ids) != n:
        raise FormatError(f"trailer lists {len(ids) if isinstance(ids, list) else 'no'} ids for {n} rows",
                          trailer_offset)
    labels = payload.get("labels")
    if bool(flags & FLAG_LABELS) != (labels is not None):
        raise FormatError("label flag and trailer labels disagree", 18)
    try:
        return FeatureSet(ids, matrix, labels, payload.get("metadata") or {})
    except InvalidInputError as e:
        raise FormatError(f"invalid feature data in '{path}': {e}", trailer_offset) from e


# =============================================================================
# Models
# =============================================================================
def _model_arrays(model):
    """(tag, arrays, metadata) of an in-memory model."""
    if isinstance(model, PCAModel):
        return "pca", [model.mean, model.components, model.explained_variances], {}
    if isinstance(model, DiagonalGMM):
        history = np.asarray(model.log_likelihood_history, dtype=np.float64)
        return "gmm", [model.weights, model.means, model.variances, history], {}
    if isinstance(model, LinearSVMModel):
        return "svm", [model.weights, model.biases], {"lam": model.lam, "classes": list(model.classes)}
    if isinstance(model, NCMModel):
        return "ncm", [model.centroids], {"classes": list(model.classes)}
    if isinstance(model, MLPModel):
        arrays = [a for pair in zip(model.weights, model.biases) for a in pair]
        return "mlp", arrays, {"dropout_rate": model.dropout_rate, "classes": list(model.classes)}
    raise InvalidInputError(f"cannot serialize a {type(model).__name__}")


def _build_model(tag, arrays, meta):
    if tag == "pca" and len(arrays) == 3:
        return PCAModel(*arrays)
    if tag == "gmm" and len(arrays) == 4:
        return DiagonalGMM(arrays[0], arrays[1], arrays[2], tuple(arrays[3].tolist()))
    if tag == "svm" and len(arrays) == 2:
        return LinearSVMModel(arrays[0], arrays[1], float(meta["lam"]), tuple(meta["classes"]))
    if tag == "ncm" and len(arrays) == 1:
        return NCMModel(arrays[0], tuple(meta["classes"]))
    if tag == "mlp" and arrays and len(arrays) % 2 == 0:
        return MLPModel(tuple(arrays[0::2]), tuple(arrays[1::2]),
                        float(meta["dropout_rate"]), tuple(meta["classes"]))
    raise InvalidInputError(f"{len(arrays)} arrays do not form a '{tag}' model")


def model_bytes(model, metadata=None):
    tag, arrays, meta = _model_arrays(model)
    parts = [MODEL_HEADER.pack(MODEL_MAGIC, FORMAT_VERSION, tag.encode("ascii"), len(arrays))]
    for array in arrays:
        array = np.ascontiguousarray(array, dtype="<f8")
        parts.append(struct.pack("<B", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(array.tobytes())
    parts.append(_trailer({**(metadata or {}), "model": meta}))
    return b"".join(parts)


def model_digest(model):
    """Short content digest of a model's parameters."""
    return hashlib.sha256(model_bytes(model)).hexdigest()[:16]


def save_model(path, model, metadata=None):
    """Writes any PCA/GMM/SVM/NCM/MLP model with a JSON metadata trailer."""
    _write_bytes(path, model_bytes(model, metadata))
    logger.info("Wrote model to %s", path)


def load_model(path, expected_tag=None):
    """
    Reads a model file.

    Returns:
        tuple: (model, metadata dict without the internal "model" entry)
    """
    buffer = _read_bytes(path)
    _check_magic(buffer, MODEL_MAGIC, path)
    (_, version, raw_tag, n_arrays), offset = _unpack(MODEL_HEADER, buffer, 0, "header")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model version {version}", 4)
    tag = raw_tag.rstrip(b"\0").decode("ascii", errors="replace")
    if tag not in MODEL_TAGS:
        raise FormatError(f"unknown model type '{tag}'", 6)
    if expected_tag is not None and tag != expected_tag:
        raise DataError(f"'{path}' holds a {tag} model, expected {expected_tag}")
    arrays = []
    for _ in range(n_arrays):
        start = offset
        (ndim,), offset = _unpack(struct.Struct("<B"), buffer, offset, "array rank")
        shape_fmt = struct.Struct(f"<{ndim}Q")
        shape, offset = _unpack(shape_fmt, buffer, offset, "array shape")
        count = math.prod(shape)
        if count * 8 > len(buffer) - offset:
            raise FormatError(f"array of shape {tuple(shape)} is truncated", start)
        arrays.append(np.frombuffer(buffer, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64))
        offset += count * 8
    trailer_offset = offset
    metadata = _read_trailer(buffer, offset)
    meta = metadata.pop("model", {})
    try:
        return _build_model(tag, arrays, meta), metadata
    except (InvalidInputError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"inconsistent {tag} model in '{path}': {e}", trailer_offset) from e


def check_config_hash(metadata, expected, path):
    """Rejects an artifact built under a different configuration."""
    found = metadata.get("config_hash")
    if found != expected:
        raise DataError(f"'{path}' was built with config hash {found}, current configuration is {expected}")
