"""Small tanh multilayer perceptron with hand-rolled backpropagation.

Parameters live in one flat float64 vector (weights then bias, layer by
layer) so consolidation penalties and Fisher estimates can treat the model
as a plain parameter vector. Argmax ties break toward the lowest class
index; softmax uses log-sum-exp stabilization throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputDomainError, NumericError, ShapeError
from .rng import make_rng


def param_count(layer_dims) -> int:
    """Total parameters for consecutive (fan_in + 1) * fan_out layers."""
    return sum((fi + 1) * fo for fi, fo in zip(layer_dims[:-1], layer_dims[1:]))


@dataclass
class ParamVector:
    """Flat parameter vector plus the layer widths that give it shape."""

    values: np.ndarray
    layer_dims: tuple[int, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        expected = param_count(self.layer_dims)
        if self.values.shape != (expected,):
            raise ShapeError(
                f"parameter vector of length {self.values.size} does not match "
                f"layer dims {self.layer_dims} (need {expected})"
            )
        if not np.all(np.isfinite(self.values)):
            raise NumericError("parameter vector contains non-finite entries")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def class_count(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.layer_dims)


@dataclass
class LabeledBatch:
    """Feature matrix [n x d] with integer class labels [n]."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ShapeError("features must be a [n x d] matrix with n >= 1")
        if self.labels.shape != (self.features.shape[0],):
            raise ShapeError("labels must be a vector matching the feature rows")
        if not np.all(np.isfinite(self.features)):
            raise InputDomainError("features must be finite")
        if np.any(self.labels < 0):
            raise InputDomainError("labels must be nonnegative class indices")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def subset(self, idx) -> "LabeledBatch":
        return LabeledBatch(self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and 0.0 < self.learning_rate <= 1.0):
            raise ConfigError(f"learning_rate must lie in (0, 1], got {self.learning_rate!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def init(input_dim: int, hidden_widths, class_count: int, seed: int) -> ParamVector:
    """Fresh parameters: weights uniform in +-1/sqrt(fan_in), biases zero."""
    hidden = tuple(int(w) for w in hidden_widths)
    if input_dim < 1 or any(w < 1 for w in hidden):
        raise ConfigError("input_dim and hidden widths must be >= 1")
    if class_count < 2:
        raise ConfigError("class_count must be >= 2")
    dims = (int(input_dim), *hidden, int(class_count))
    rng = make_rng(seed)
    chunks = []
    for fi, fo in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fi)
        chunks.append(rng.uniform(-bound, bound, size=(fi, fo)).ravel())
        chunks.append(np.zeros(fo))
    return ParamVector(np.concatenate(chunks), dims)


def _unpack(theta: ParamVector):
    """Views of the flat vector as per-layer (W, b) pairs."""
    out = []
    off = 0
    dims = theta.layer_dims
    for fi, fo in zip(dims[:-1], dims[1:]):
        w = theta.values[off : off + fi * fo].reshape(fi, fo)
        off += fi * fo
        b = theta.values[off : off + fo]
        off += fo
        out.append((w, b))
    return out


def _forward(theta: ParamVector, X: np.ndarray):
    """Forward pass. Returns (hidden activations incl. input, probs, log_probs)."""
    layers = _unpack(theta)
    acts = [X]
    h = X
    logits = None
    for li, (w, b) in enumerate(layers):
        z = h @ w + b
        if not np.all(np.isfinite(z)):
            raise NumericError(f"non-finite pre-activation at layer {li}")
        if li < len(layers) - 1:
            h = np.tanh(z)
            acts.append(h)
        else:
            logits = z
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    norm = expz.sum(axis=1, keepdims=True)
    probs = expz / norm
    log_probs = shifted - np.log(norm)
    return acts, probs, log_probs


def _check_features(theta: ParamVector, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != theta.input_dim:
        raise ShapeError(
            f"feature matrix of shape {X.shape} does not match input_dim {theta.input_dim}"
        )
    return X


def predict_proba(theta: ParamVector, x) -> np.ndarray:
    """Softmax class probabilities for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (theta.input_dim,):
        raise ShapeError(f"feature vector of shape {x.shape} does not match input_dim {theta.input_dim}")
    _, probs, _ = _forward(theta, x[None, :])
    return probs[0]


def predict_batch(theta: ParamVector, X) -> tuple[np.ndarray, np.ndarray]:
    """Argmax labels (ties to the lowest class index) and max-softmax confidences."""
    X = _check_features(theta, X)
    _, probs, _ = _forward(theta, X)
    labels = np.argmax(probs, axis=1)
    return labels, probs[np.arange(len(labels)), labels]


def loss_and_grad(theta: ParamVector, batch: LabeledBatch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its exact parameter gradient."""
    X = _check_features(theta, batch.features)
    y = batch.labels
    if np.any(y >= theta.class_count):
        raise InputDomainError("labels must be below the model's class count")
    acts, probs, log_probs = _forward(theta, X)
    n = batch.n
    loss = -float(np.mean(log_probs[np.arange(n), y]))
    layers = _unpack(theta)
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad = np.empty_like(theta.values)
    offsets = []
    off = 0
    dims = theta.layer_dims
    for fi, fo in zip(dims[:-1], dims[1:]):
        offsets.append((off, fi, fo))
        off += (fi + 1) * fo
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        a_prev = acts[li]
        start, fi, fo = offsets[li]
        grad[start : start + fi * fo] = (a_prev.T @ delta).ravel()
        grad[start + fi * fo : start + (fi + 1) * fo] = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ w.T) * (1.0 - acts[li] ** 2)
    return loss, grad


def per_sample_squared_grads(theta: ParamVector, batch: LabeledBatch) -> np.ndarray:
    """Sum over samples of the squared per-sample gradient of -ln p(y|x).

    Per-sample weight gradients are outer products activation x delta, so
    their squares contract to matmuls of elementwise squares; no per-sample
    loop is needed. Used by the Fisher estimator.
    """
    X = _check_features(theta, batch.features)
    y = batch.labels
    if np.any(y >= theta.class_count):
        raise InputDomainError("labels must be below the model's class count")
    acts, probs, _ = _forward(theta, X)
    layers = _unpack(theta)
    n = batch.n
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    out = np.empty_like(theta.values)
    offsets = []
    off = 0
    dims = theta.layer_dims
    for fi, fo in zip(dims[:-1], dims[1:]):
        offsets.append((off, fi, fo))
        off += (fi + 1) * fo
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        a_prev = acts[li]
        start, fi, fo = offsets[li]
        out[start : start + fi * fo] = ((a_prev**2).T @ (delta**2)).ravel()
        out[start + fi * fo : start + (fi + 1) * fo] = (delta**2).sum(axis=0)
        if li > 0:
            delta = (delta @ w.T) * (1.0 - acts[li] ** 2)
    return out


def final_layer_mask(theta: ParamVector) -> np.ndarray:
    """Boolean mask selecting only the final layer's weights and bias."""
    mask = np.zeros(theta.values.shape, dtype=bool)
    fi, fo = theta.layer_dims[-2], theta.layer_dims[-1]
    mask[theta.values.size - (fi + 1) * fo :] = True
    return mask


def train(
    theta: ParamVector,
    data: LabeledBatch,
    cfg: TrainConfig,
    penalty=None,
    update_mask: np.ndarray | None = None,
    history: list | None = None,
) -> tuple[ParamVector, int]:
    """Mini-batch SGD on cross-entropy plus an optional penalty.

    ``penalty`` is a hook mapping the flat parameter values to a
    (value, gradient) pair, added to the data loss at every step.
    ``update_mask`` restricts updates to the selected coordinates.
    Shuffling is deterministic per cfg.seed. Returns the trained
    parameters and the exact number of gradient updates performed.
    When ``history`` is a list, one (data_loss, penalty_value, objective)
    triple is appended per update.
    """
    if data.features.shape[1] != theta.input_dim:
        raise ShapeError("training data does not match the model's input dim")
    th = theta.copy()
    rng = make_rng(cfg.seed)
    n = data.n
    updates = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grad = loss_and_grad(th, data.subset(idx))
            if penalty is not None:
                pval, pgrad = penalty(th.values)
                grad = grad + pgrad
            else:
                pval = 0.0
            if update_mask is not None:
                grad = grad * update_mask
            if history is not None:
                history.append((loss, pval, loss + pval))
            th.values = th.values - cfg.learning_rate * grad
            updates += 1
    return th, updates


def accuracy(theta: ParamVector, data: LabeledBatch) -> float:
    """Fraction of samples whose argmax prediction matches the label."""
    labels, _ = predict_batch(theta, data.features)
    return float(np.mean(labels == data.labels))
