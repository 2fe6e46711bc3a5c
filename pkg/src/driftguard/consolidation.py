"""Diagonal Fisher estimation and the weight-consolidation penalty.

Each completed task leaves a snapshot (anchor parameters plus a diagonal
Fisher importance vector); fine-tuning on later data adds a quadratic
penalty pulling every parameter toward each stored anchor, weighted by
its importance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import classifier
from .classifier import LabeledBatch, ParamVector, TrainConfig
from .errors import ConfigError, InputDomainError, InsufficientDataError, ShapeError
from .rng import make_rng

FISHER_MODES = ("empirical-label", "model-sampled-label")


@dataclass(frozen=True)
class ConsolidationConfig:
    lambda_ewc: float = 40.0
    fisher_samples: int = 512
    fisher_mode: str = "empirical-label"
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.lambda_ewc) and self.lambda_ewc >= 0.0):
            raise ConfigError(f"lambda_ewc must be a nonnegative real, got {self.lambda_ewc!r}")
        if self.fisher_samples < 1:
            raise ConfigError("fisher_samples must be >= 1")
        if self.fisher_mode not in FISHER_MODES:
            raise ConfigError(f"fisher_mode must be one of {FISHER_MODES}, got {self.fisher_mode!r}")


@dataclass
class TaskSnapshot:
    """Anchor for one learned task: MAP parameters and Fisher diagonal."""

    task_id: int
    theta_star: ParamVector
    fisher_diag: np.ndarray

    def __post_init__(self):
        self.fisher_diag = np.asarray(self.fisher_diag, dtype=np.float64)
        if self.fisher_diag.shape != self.theta_star.values.shape:
            raise ShapeError("fisher_diag length must match theta_star")
        if not np.all(np.isfinite(self.fisher_diag)) or np.any(self.fisher_diag < 0.0):
            raise InputDomainError("fisher_diag entries must be finite and >= 0")


def _values_of(theta) -> np.ndarray:
    return theta.values if isinstance(theta, ParamVector) else np.asarray(theta, dtype=np.float64)


def estimate_fisher_diag(theta: ParamVector, data: LabeledBatch, cfg: ConsolidationConfig) -> np.ndarray:
    """Diagonal Fisher estimate: mean squared per-sample score at theta.

    Uses the first ``fisher_samples`` rows when the batch is large enough,
    otherwise samples row indices with replacement (seeded). Labels come
    from the dataset (empirical-label mode) or are drawn from the model's
    predictive distribution (model-sampled-label mode).
    """
    if data is None or data.n < 1:
        raise InsufficientDataError("fisher estimation needs at least one sample")
    m = cfg.fisher_samples
    if data.n >= m:
        idx = np.arange(m)
    else:
        idx = make_rng(cfg.seed, 1).integers(0, data.n, size=m)
    X = data.features[idx]
    if cfg.fisher_mode == "empirical-label":
        y = data.labels[idx]
    else:
        _, probs, _ = classifier._forward(theta, X)
        cum = np.cumsum(probs, axis=1)
        u = make_rng(cfg.seed, 2).random(m)
        y = np.minimum((u[:, None] < cum).argmax(axis=1), theta.class_count - 1)
    sq = classifier.per_sample_squared_grads(theta, LabeledBatch(X, y))
    return sq / m


def ewc_penalty(theta, snapshots, lambda_ewc: float) -> float:
    """Quadratic anchor penalty: (lambda/2) * sum_i sum_j F_ij (theta_j - theta*_ij)^2."""
    vals = _values_of(theta)
    total = 0.0
    for snap in snapshots:
        if snap.theta_star.values.shape != vals.shape:
            raise ShapeError("snapshot shape does not match the parameter vector")
        d = vals - snap.theta_star.values
        total += float(np.dot(snap.fisher_diag * d, d))
    return 0.5 * lambda_ewc * total


def ewc_penalty_grad(theta, snapshots, lambda_ewc: float) -> np.ndarray:
    """Gradient of ewc_penalty: component j is lambda * sum_i F_ij (theta_j - theta*_ij)."""
    vals = _values_of(theta)
    g = np.zeros_like(vals)
    for snap in snapshots:
        if snap.theta_star.values.shape != vals.shape:
            raise ShapeError("snapshot shape does not match the parameter vector")
        g += snap.fisher_diag * (vals - snap.theta_star.values)
    return lambda_ewc * g


def make_penalty_hook(snapshots, lambda_ewc: float):
    """Bind snapshots and strength into the (value, grad) hook train expects."""
    snaps = list(snapshots)

    def hook(values: np.ndarray) -> tuple[float, np.ndarray]:
        return ewc_penalty(values, snaps, lambda_ewc), ewc_penalty_grad(values, snaps, lambda_ewc)

    return hook


def fine_tune_dawc(
    theta: ParamVector,
    snapshots,
    new_data: LabeledBatch,
    train_cfg: TrainConfig,
    cons_cfg: ConsolidationConfig,
    history: list | None = None,
) -> tuple[ParamVector, TaskSnapshot, int]:
    """Fine-tune on new-task data under the consolidation penalty.

    Trains with the penalty hook over all supplied snapshots, then
    estimates the Fisher diagonal on the new data at the tuned parameters
    and emits the next snapshot (task_id = max existing id + 1; the caller
    appends it). Returns (tuned parameters, new snapshot, update count).
    """
    snaps = list(snapshots)
    hook = make_penalty_hook(snaps, cons_cfg.lambda_ewc)
    tuned, updates = classifier.train(theta, new_data, train_cfg, penalty=hook, history=history)
    fisher = estimate_fisher_diag(tuned, new_data, cons_cfg)
    next_id = max((s.task_id for s in snaps), default=-1) + 1
    return tuned, TaskSnapshot(next_id, tuned.copy(), fisher), updates
