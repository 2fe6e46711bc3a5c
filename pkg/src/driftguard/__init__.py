"""driftguard: confidence-based drift detection with Fisher-weighted consolidation."""

from .beta_dist import BetaParams, clamp, fit_mle, log_pdf
from .classifier import LabeledBatch, ParamVector, TrainConfig
from .consolidation import (
    ConsolidationConfig,
    TaskSnapshot,
    estimate_fisher_diag,
    ewc_penalty,
    ewc_penalty_grad,
    fine_tune_dawc,
)
from .drift_detector import (
    ConfidenceWindow,
    DetectorConfig,
    DriftDetector,
    DriftReport,
    test_for_drift,
)
from .metrics import AccuracyMatrix, CostLedger, average_accuracy, average_forgetting
from .runner import (
    CsvStreamConfig,
    ExperimentConfig,
    RunReport,
    run_dawc,
    run_experiment,
    run_fcb,
    run_stl,
)
from .stream_gen import (
    DriftSpec,
    StreamSample,
    TaskSequenceConfig,
    change_points,
    ingest_csv,
    make_heldout,
    make_stream,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyMatrix",
    "BetaParams",
    "ConfidenceWindow",
    "ConsolidationConfig",
    "CostLedger",
    "CsvStreamConfig",
    "DetectorConfig",
    "DriftDetector",
    "DriftReport",
    "DriftSpec",
    "ExperimentConfig",
    "LabeledBatch",
    "ParamVector",
    "RunReport",
    "StreamSample",
    "TaskSequenceConfig",
    "TaskSnapshot",
    "TrainConfig",
    "average_accuracy",
    "average_forgetting",
    "change_points",
    "clamp",
    "estimate_fisher_diag",
    "ewc_penalty",
    "ewc_penalty_grad",
    "fine_tune_dawc",
    "fit_mle",
    "ingest_csv",
    "log_pdf",
    "make_heldout",
    "make_stream",
    "run_dawc",
    "run_experiment",
    "run_fcb",
    "run_stl",
    "test_for_drift",
]
