"""End-to-end experiment orchestration.

One shared loop drives all three methods: train an initial model on the
first labeled buffer, stream the rest sample by sample through the drift
detector, and on every detection collect the next labeled buffer and
adapt. Only the adaptation step differs per method:

  dawc - fine-tune under the consolidation penalty, then snapshot;
  stl  - train a fresh model on the new buffer alone;
  fcb  - fine-tune with updates masked to the final layer.

Accuracy-matrix rows are written after each completed training event
(initial training is event 1) against held-out per-task test sets.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import classifier, consolidation, stream_gen
from .classifier import LabeledBatch, ParamVector, TrainConfig
from .consolidation import ConsolidationConfig, TaskSnapshot
from .drift_detector import DetectorConfig, DriftDetector
from .errors import ConfigError
from .metrics import AccuracyMatrix, CostLedger, average_accuracy, average_forgetting
from .rng import derive_seed
from .stream_gen import DriftSpec, StreamSample, TaskSequenceConfig

METHODS = ("dawc", "stl", "fcb")
REPORT_SCHEMA = "driftguard/1"
HELDOUT_PER_TASK = 250


@dataclass(frozen=True)
class CsvStreamConfig:
    """External labeled stream. The trailing holdout fraction of each task's
    block is reserved for evaluation when a task_id column is present."""

    path: str
    feature_dim: int
    class_count: int
    holdout_fraction: float = 0.2

    def __post_init__(self):
        if self.feature_dim < 1 or self.class_count < 2:
            raise ConfigError("feature_dim must be >= 1 and class_count >= 2")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "dawc"
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    consolidation: ConsolidationConfig = field(default_factory=ConsolidationConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    stream: TaskSequenceConfig | CsvStreamConfig = field(default_factory=TaskSequenceConfig)
    hidden_widths: tuple[int, ...] = (32, 32)
    adaptation_buffer_size: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.adaptation_buffer_size < 1:
            raise ConfigError("adaptation_buffer_size must be >= 1")
        hidden = tuple(int(w) for w in self.hidden_widths)
        if any(w < 1 for w in hidden):
            raise ConfigError("hidden widths must be >= 1")
        object.__setattr__(self, "hidden_widths", hidden)


@dataclass
class RunReport:
    schema: str
    method: str
    config: dict
    drift_events: list[dict]
    accuracy_matrix: list[list[float]]
    aa: float | None
    af: float | None
    cost: dict
    labeled_samples_used: int
    warnings: list[str]
    wall_time_ms: float

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "schema": self.schema,
            "method": self.method,
            "config": self.config,
            "drift_events": self.drift_events,
            "accuracy_matrix": self.accuracy_matrix,
            "aa": self.aa,
            "af": self.af,
            "cost": self.cost,
            "labeled_samples_used": self.labeled_samples_used,
            "warnings": self.warnings,
        }
        if include_timing:
            out["wall_time_ms"] = self.wall_time_ms
        return out

    def to_json(self, include_timing: bool = True) -> str:
        # wall time is the one run-dependent field; everything else is fixed
        # byte-for-byte by (config, seed)
        return json.dumps(self.to_dict(include_timing), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            schema=d["schema"],
            method=d["method"],
            config=d["config"],
            drift_events=d["drift_events"],
            accuracy_matrix=d["accuracy_matrix"],
            aa=d["aa"],
            af=d["af"],
            cost=d["cost"],
            labeled_samples_used=d["labeled_samples_used"],
            warnings=d["warnings"],
            wall_time_ms=d.get("wall_time_ms", 0.0),
        )


# --- config (de)serialization -------------------------------------------------


def config_to_dict(cfg: ExperimentConfig) -> dict:
    if isinstance(cfg.stream, TaskSequenceConfig):
        stream = {
            "kind": "synthetic",
            "class_count": cfg.stream.class_count,
            "feature_dim": cfg.stream.feature_dim,
            "samples_per_task": cfg.stream.samples_per_task,
            "task_count": cfg.stream.task_count,
            "drift_between_tasks": [
                {"kind": s.kind, "magnitude": s.magnitude} for s in cfg.stream.drift_between_tasks
            ],
            "class_noise_sigma": cfg.stream.class_noise_sigma,
            "seed": cfg.stream.seed,
        }
    else:
        stream = {
            "kind": "csv",
            "path": cfg.stream.path,
            "feature_dim": cfg.stream.feature_dim,
            "class_count": cfg.stream.class_count,
            "holdout_fraction": cfg.stream.holdout_fraction,
        }
    return {
        "method": cfg.method,
        "seed": cfg.seed,
        "adaptation_buffer_size": cfg.adaptation_buffer_size,
        "hidden_widths": list(cfg.hidden_widths),
        "detector": {
            "lambda_sens": cfg.detector.lambda_sens,
            "delta": cfg.detector.delta,
            "n_max": cfg.detector.n_max,
            "check_stride": cfg.detector.check_stride,
        },
        "consolidation": {
            "lambda_ewc": cfg.consolidation.lambda_ewc,
            "fisher_samples": cfg.consolidation.fisher_samples,
            "fisher_mode": cfg.consolidation.fisher_mode,
            "seed": cfg.consolidation.seed,
        },
        "training": {
            "learning_rate": cfg.training.learning_rate,
            "epochs": cfg.training.epochs,
            "batch_size": cfg.training.batch_size,
            "seed": cfg.training.seed,
        },
        "stream": stream,
    }


def _take(d: dict, allowed: set[str], where: str) -> dict:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("experiment config must be a JSON object")
    _take(
        d,
        {
            "method",
            "seed",
            "adaptation_buffer_size",
            "hidden_widths",
            "detector",
            "consolidation",
            "training",
            "stream",
        },
        "config",
    )
    det = _take(
        dict(d.get("detector", {})),
        {"lambda_sens", "delta", "n_max", "check_stride"},
        "detector",
    )
    cons = _take(
        dict(d.get("consolidation", {})),
        {"lambda_ewc", "fisher_samples", "fisher_mode", "seed"},
        "consolidation",
    )
    train = _take(
        dict(d.get("training", {})),
        {"learning_rate", "epochs", "batch_size", "seed"},
        "training",
    )
    stream_d = dict(d.get("stream", {"kind": "synthetic"}))
    kind = stream_d.pop("kind", "synthetic")
    if kind == "synthetic":
        _take(
            stream_d,
            {
                "class_count",
                "feature_dim",
                "samples_per_task",
                "task_count",
                "drift_between_tasks",
                "class_noise_sigma",
                "seed",
            },
            "stream",
        )
        drifts = stream_d.pop("drift_between_tasks", None)
        if drifts is not None:
            drifts = tuple(DriftSpec(**_take(dict(s), {"kind", "magnitude"}, "drift")) for s in drifts)
        stream = TaskSequenceConfig(drift_between_tasks=drifts, **stream_d)
    elif kind == "csv":
        _take(stream_d, {"path", "feature_dim", "class_count", "holdout_fraction"}, "stream")
        stream = CsvStreamConfig(**stream_d)
    else:
        raise ConfigError(f"stream kind must be 'synthetic' or 'csv', got {kind!r}")
    try:
        return ExperimentConfig(
            method=d.get("method", "dawc"),
            seed=int(d.get("seed", 0)),
            adaptation_buffer_size=int(d.get("adaptation_buffer_size", 200)),
            hidden_widths=tuple(d.get("hidden_widths", (32, 32))),
            detector=DetectorConfig(**det),
            consolidation=ConsolidationConfig(**cons),
            training=TrainConfig(**train),
            stream=stream,
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --- stream loading -----------------------------------------------------------


def _load_stream(cfg: ExperimentConfig):
    """Returns (stream samples, held-out batches or None, class_count, warnings)."""
    warnings: list[str] = []
    if isinstance(cfg.stream, TaskSequenceConfig):
        stream = stream_gen.make_stream(cfg.stream)
        heldout = [
            LabeledBatch(X, y) for X, y in stream_gen.make_heldout(cfg.stream, HELDOUT_PER_TASK)
        ]
        return stream, heldout, cfg.stream.class_count, warnings
    rows = stream_gen.ingest_csv(cfg.stream.path, cfg.stream.feature_dim, cfg.stream.class_count)
    if not rows:
        raise ConfigError(f"csv stream {cfg.stream.path!r} contains no samples")
    if any(s.task_id < 0 for s in rows):
        warnings.append("csv stream has no task_id column: accuracy metrics disabled")
        return rows, None, cfg.stream.class_count, warnings
    # contiguous task blocks, in order of first appearance; the trailing
    # fraction of each block is held out for evaluation
    blocks: list[list[StreamSample]] = []
    seen: dict[int, int] = {}
    for s in rows:
        if s.task_id not in seen:
            seen[s.task_id] = len(blocks)
            blocks.append([])
        blocks[seen[s.task_id]].append(s)
    heldout = []
    streamed: list[StreamSample] = []
    for block in blocks:
        cut = len(block) - int(len(block) * cfg.stream.holdout_fraction)
        cut = max(cut, 1)
        streamed.extend(block[:cut])
        tail = block[cut:]
        if not tail:
            raise ConfigError(
                "holdout_fraction leaves an empty test set for some task; lower it or add data"
            )
        heldout.append(
            LabeledBatch(np.stack([s.features for s in tail]), [s.label for s in tail])
        )
    streamed = [
        StreamSample(s.features, s.label, s.task_id, i) for i, s in enumerate(streamed)
    ]
    return streamed, heldout, cfg.stream.class_count, warnings


def _batch_from(samples) -> LabeledBatch:
    return LabeledBatch(np.stack([s.features for s in samples]), [s.label for s in samples])


# --- the shared loop ----------------------------------------------------------


def _event_train_cfg(cfg: ExperimentConfig, event: int) -> TrainConfig:
    return replace(cfg.training, seed=derive_seed(cfg.seed, 20, event, cfg.training.seed))


def _event_cons_cfg(cfg: ExperimentConfig, event: int) -> ConsolidationConfig:
    return replace(cfg.consolidation, seed=derive_seed(cfg.seed, 30, event, cfg.consolidation.seed))


def _record_row(matrix: AccuracyMatrix, event: int, theta: ParamVector, heldout) -> None:
    for col in range(1, event + 1):
        batch = heldout[min(col, len(heldout)) - 1]
        matrix.record(event, col, classifier.accuracy(theta, batch))


class _Predictions:
    """Model outputs for the stream suffix starting at ``start`` (the model
    only changes at training events, so one batched pass per event suffices)."""

    def __init__(self, theta: ParamVector, stream, start: int):
        self.start = start
        if start < len(stream):
            X = np.stack([s.features for s in stream[start:]])
            self.labels, self.confidences = classifier.predict_batch(theta, X)
        else:
            self.labels = np.empty(0, dtype=np.int64)
            self.confidences = np.empty(0)

    def at(self, i: int) -> tuple[int, float]:
        return int(self.labels[i - self.start]), float(self.confidences[i - self.start])


def _adapt(cfg, theta, snapshots, buffer, event, fcb_mask, input_dim, class_count):
    tcfg = _event_train_cfg(cfg, event)
    if cfg.method == "dawc":
        tuned, snap, updates = consolidation.fine_tune_dawc(
            theta, snapshots, buffer, tcfg, _event_cons_cfg(cfg, event)
        )
        snapshots.append(snap)
        return tuned, updates
    if cfg.method == "stl":
        fresh = classifier.init(
            input_dim, cfg.hidden_widths, class_count, seed=derive_seed(cfg.seed, 10, event)
        )
        return classifier.train(fresh, buffer, tcfg)
    return classifier.train(theta, buffer, tcfg, update_mask=fcb_mask)


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    start_time = time.perf_counter()
    stream, heldout, class_count, warnings = _load_stream(cfg)
    buf_size = cfg.adaptation_buffer_size
    if len(stream) <= buf_size:
        raise ConfigError(
            f"stream of {len(stream)} samples cannot cover the initial buffer of {buf_size}"
        )
    input_dim = stream[0].features.shape[0]

    detector = DriftDetector(cfg.detector)
    ledger = CostLedger()
    matrix = AccuracyMatrix()
    drift_events: list[dict] = []
    snapshots: list[TaskSnapshot] = []
    labeled_used = buf_size

    initial = _batch_from(stream[:buf_size])
    theta = classifier.init(
        input_dim, cfg.hidden_widths, class_count, seed=derive_seed(cfg.seed, 10, 0)
    )
    theta, updates = classifier.train(theta, initial, _event_train_cfg(cfg, 0))
    ledger.gradient_updates += updates
    if cfg.method == "dawc":
        fisher = consolidation.estimate_fisher_diag(theta, initial, _event_cons_cfg(cfg, 0))
        snapshots.append(TaskSnapshot(0, theta.copy(), fisher))
    fcb_mask = classifier.final_layer_mask(theta) if cfg.method == "fcb" else None

    events = 1
    if heldout is not None:
        _record_row(matrix, events, theta, heldout)

    i = buf_size
    preds = _Predictions(theta, stream, i)
    while i < len(stream):
        label, conf = preds.at(i)
        report = detector.step(label, conf)
        if report is None:
            i += 1
            continue
        estimated = (
            i - report.window_len + 1 + report.change_index
            if report.change_index is not None
            else None
        )
        drift_events.append(
            {
                "stream_position": i,
                "estimated_change_position": estimated,
                "score_sf": report.score_sf,
                "threshold": report.threshold_th,
            }
        )
        buffer_samples = stream[i + 1 : i + 1 + buf_size]
        if len(buffer_samples) < buf_size:
            warnings.append(
                f"stream exhausted mid-buffer after detection at position {i}: "
                f"gathered {len(buffer_samples)} of {buf_size} samples"
            )
        if not buffer_samples:
            i += 1
            continue
        labeled_used += len(buffer_samples)
        theta, updates = _adapt(
            cfg, theta, snapshots, _batch_from(buffer_samples), events, fcb_mask,
            input_dim, class_count,
        )
        ledger.gradient_updates += updates
        ledger.fine_tune_events += 1
        events += 1
        if heldout is not None:
            _record_row(matrix, events, theta, heldout)
        i = i + 1 + len(buffer_samples)
        preds = _Predictions(theta, stream, i)
    ledger.detector_invocations = detector.invocations

    aa = average_accuracy(matrix, events) if heldout is not None else None
    af = average_forgetting(matrix, events) if heldout is not None else None
    wall_ms = (time.perf_counter() - start_time) * 1000.0
    return RunReport(
        schema=REPORT_SCHEMA,
        method=cfg.method,
        config=config_to_dict(cfg),
        drift_events=drift_events,
        accuracy_matrix=matrix.rows(),
        aa=aa,
        af=af,
        cost=ledger.as_dict(),
        labeled_samples_used=labeled_used,
        warnings=warnings,
        wall_time_ms=wall_ms,
    )


def _run_method(cfg: ExperimentConfig, method: str) -> RunReport:
    if cfg.method != method:
        raise ConfigError(f"config method is {cfg.method!r}, expected {method!r}")
    return run_experiment(cfg)


def run_dawc(cfg: ExperimentConfig) -> RunReport:
    return _run_method(cfg, "dawc")


def run_stl(cfg: ExperimentConfig) -> RunReport:
    return _run_method(cfg, "stl")


def run_fcb(cfg: ExperimentConfig) -> RunReport:
    return _run_method(cfg, "fcb")
