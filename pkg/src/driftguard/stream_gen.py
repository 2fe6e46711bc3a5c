"""Synthetic drifting-task stream generation and CSV ingestion.

Class-conditional Gaussian blobs ride on a circle of radius 3; every task
transition applies a geometric transform (rotation by default) to all
class means, so the covariate distribution moves while each blob keeps its
label. Ground-truth change points are a property of the config alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CsvParseError, InputDomainError
from .rng import make_rng

MEAN_RADIUS = 3.0
DRIFT_KINDS = ("rotate", "translate", "scale")

# calibrated defaults: large enough that confidences visibly drop at a
# transition, small enough that one model can still cover all four tasks
DEFAULT_DRIFT_MAGNITUDE = 0.18
DEFAULT_NOISE_SIGMA = 0.30


@dataclass(frozen=True)
class DriftSpec:
    """One transition: rotate (radians), translate (offset norm), or scale (factor)."""

    kind: str = "rotate"
    magnitude: float = DEFAULT_DRIFT_MAGNITUDE

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ConfigError(f"drift kind must be one of {DRIFT_KINDS}, got {self.kind!r}")
        if not np.isfinite(self.magnitude):
            raise ConfigError("drift magnitude must be finite")
        if self.kind == "scale" and self.magnitude <= 0.0:
            raise ConfigError("scale factor must be positive")


@dataclass(frozen=True)
class TaskSequenceConfig:
    class_count: int = 10
    feature_dim: int = 2
    samples_per_task: int = 1000
    task_count: int = 4
    drift_between_tasks: tuple[DriftSpec, ...] | None = None
    class_noise_sigma: float = DEFAULT_NOISE_SIGMA
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2:
            raise ConfigError("class_count must be >= 2")
        if self.feature_dim < 2:
            raise ConfigError("feature_dim must be >= 2")
        if self.samples_per_task < 1 or self.task_count < 1:
            raise ConfigError("samples_per_task and task_count must be >= 1")
        if not (np.isfinite(self.class_noise_sigma) and self.class_noise_sigma > 0.0):
            raise ConfigError("class_noise_sigma must be a positive real")
        drifts = self.drift_between_tasks
        if drifts is None:
            drifts = tuple(DriftSpec() for _ in range(self.task_count - 1))
        else:
            drifts = tuple(drifts)
        if len(drifts) != self.task_count - 1:
            raise ConfigError(
                f"drift_between_tasks needs {self.task_count - 1} entries, got {len(drifts)}"
            )
        object.__setattr__(self, "drift_between_tasks", drifts)


@dataclass(frozen=True)
class StreamSample:
    features: np.ndarray
    label: int
    task_id: int
    stream_index: int


def change_points(cfg: TaskSequenceConfig) -> list[int]:
    """Ground-truth change positions; depend on the config only."""
    return [t * cfg.samples_per_task for t in range(1, cfg.task_count)]


def _initial_means(cfg: TaskSequenceConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.feature_dim == 2:
        # evenly spaced on the circle with a seed-dependent phase: uniform as
        # an ensemble, and guaranteed class separation at every seed
        phase = rng.uniform(0.0, 2.0 * np.pi)
        angles = phase + 2.0 * np.pi * np.arange(cfg.class_count) / cfg.class_count
        return MEAN_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])
    g = rng.standard_normal((cfg.class_count, cfg.feature_dim))
    return MEAN_RADIUS * g / np.linalg.norm(g, axis=1, keepdims=True)


def _apply_drift(means: np.ndarray, spec: DriftSpec, rng: np.random.Generator) -> np.ndarray:
    out = means.copy()
    if spec.kind == "rotate":
        c, s = np.cos(spec.magnitude), np.sin(spec.magnitude)
        x, y = out[:, 0].copy(), out[:, 1].copy()
        out[:, 0] = c * x - s * y
        out[:, 1] = s * x + c * y
    elif spec.kind == "translate":
        direction = rng.standard_normal(means.shape[1])
        direction /= np.linalg.norm(direction)
        out += spec.magnitude * direction
    else:
        out *= spec.magnitude
    return out


def task_means(cfg: TaskSequenceConfig) -> np.ndarray:
    """Per-task class means, shape (task_count, class_count, feature_dim)."""
    rng = make_rng(cfg.seed, 2)
    means = [_initial_means(cfg, rng)]
    for spec in cfg.drift_between_tasks:
        means.append(_apply_drift(means[-1], spec, rng))
    return np.stack(means)


def _sample_task(means: np.ndarray, count: int, sigma: float, rng: np.random.Generator):
    c = means.shape[0]
    base, extra = divmod(count, c)
    labels = np.concatenate([np.repeat(np.arange(c), base), np.arange(extra)])
    features = means[labels] + sigma * rng.standard_normal((count, means.shape[1]))
    perm = rng.permutation(count)
    return features[perm], labels[perm]


def make_stream(cfg: TaskSequenceConfig) -> list[StreamSample]:
    """Deterministic stream of labeled samples, tasks in order, shuffled within task."""
    means = task_means(cfg)
    rng = make_rng(cfg.seed, 0)
    samples: list[StreamSample] = []
    idx = 0
    for t in range(cfg.task_count):
        features, labels = _sample_task(means[t], cfg.samples_per_task, cfg.class_noise_sigma, rng)
        for j in range(cfg.samples_per_task):
            samples.append(StreamSample(features[j], int(labels[j]), t, idx))
            idx += 1
    return samples


def make_heldout(cfg: TaskSequenceConfig, samples_per_task: int = 250):
    """Fresh evaluation draws per task, on an RNG stream disjoint from make_stream."""
    means = task_means(cfg)
    rng = make_rng(cfg.seed, 1)
    return [
        _sample_task(means[t], samples_per_task, cfg.class_noise_sigma, rng)
        for t in range(cfg.task_count)
    ]


def ingest_csv(path, feature_dim: int, class_count: int) -> list[StreamSample]:
    """Parse a labeled feature stream from CSV.

    Header must be ``f0,...,f{d-1},label`` with an optional trailing
    ``task_id`` column; task_id is -1 for every row when the column is
    absent. Parse failures name the offending line (header is line 1).
    """
    expected = [f"f{i}" for i in range(feature_dim)] + ["label"]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file: missing header", line=1) from None
        header = [h.strip() for h in header]
        if header == expected:
            has_task = False
        elif header == expected + ["task_id"]:
            has_task = True
        else:
            raise CsvParseError(
                f"header must be {','.join(expected)}[,task_id], got {','.join(header)}", line=1
            )
        width = len(expected) + (1 if has_task else 0)
        samples: list[StreamSample] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise CsvParseError(f"expected {width} fields, got {len(row)}", line=line_no)
            try:
                features = np.array([float(v) for v in row[:feature_dim]])
                label = int(row[feature_dim])
                task_id = int(row[feature_dim + 1]) if has_task else -1
            except ValueError as exc:
                raise CsvParseError(str(exc), line=line_no) from None
            if not np.all(np.isfinite(features)):
                raise CsvParseError("features must be finite", line=line_no)
            if not 0 <= label < class_count:
                raise InputDomainError(
                    f"line {line_no}: label {label} outside [0, {class_count})"
                )
            samples.append(StreamSample(features, label, task_id, len(samples)))
    return samples
