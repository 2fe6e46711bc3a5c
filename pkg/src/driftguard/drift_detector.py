"""Sliding-window drift detection over classifier confidence scores.

The window of recent (label, confidence) pairs is scanned at every
admissible split into a reference prefix and a target suffix. A split is
scored only when the target's mean confidence has dropped below
``(1 - lambda) *`` the reference mean; the score is the summed log ratio
of target-fit to reference-fit Beta densities over the target segment.
The best split score against ``-ln(lambda)`` decides detection, and the
best split position localizes the change.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import beta_dist
from .errors import (
    ConfigError,
    DegenerateSampleError,
    InsufficientDataError,
)


@dataclass(frozen=True)
class DetectorConfig:
    """Detector knobs: sensitivity, split padding, window capacity, cadence."""

    lambda_sens: float = 0.05
    delta: int = 100
    n_max: int = 1000
    check_stride: int = 25

    def __post_init__(self):
        if not (np.isfinite(self.lambda_sens) and 0.0 < self.lambda_sens < 1.0):
            raise ConfigError(f"lambda_sens must lie in (0, 1), got {self.lambda_sens!r}")
        if self.delta < 1:
            raise ConfigError("delta must be a positive integer")
        if self.n_max <= 2 * self.delta:
            raise ConfigError("n_max must exceed 2 * delta")
        if self.check_stride < 1:
            raise ConfigError("check_stride must be >= 1")

    @property
    def threshold(self) -> float:
        return -math.log(self.lambda_sens)

    @property
    def min_window(self) -> int:
        return 2 * self.delta + 2


class ConfidenceWindow:
    """Bounded FIFO of (predicted_label, clamped confidence) pairs."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("window capacity must be >= 1")
        self.capacity = capacity
        self._entries: deque[tuple[int, float]] = deque(maxlen=capacity)

    def push(self, label: int, q: float) -> None:
        """Clamp q into (0, 1) and append; the oldest entry falls off at capacity."""
        qc = beta_dist.clamp(float(q))
        self._entries.append((int(label), qc))

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self) -> None:
        self._entries.clear()

    def entries(self) -> list[tuple[int, float]]:
        return list(self._entries)

    def confidences(self) -> np.ndarray:
        n = len(self._entries)
        return np.fromiter((q for _, q in self._entries), dtype=np.float64, count=n)


@dataclass(frozen=True)
class DriftReport:
    """Outcome of one window scan.

    ``change_index`` is the best split position k (reference = first k
    window entries), present exactly when some split scored positive.
    """

    detected: bool
    score_sf: float
    threshold_th: float
    change_index: int | None
    window_len: int


def test_for_drift(window: ConfidenceWindow, cfg: DetectorConfig) -> DriftReport:
    """Scan every admissible split of the window and report the best score.

    Splits whose segments cannot support a Beta fit (constant values, or
    fewer samples than the fitter's minimum when delta is tiny) are skipped.
    Requires at least ``2 * delta + 2`` window entries.
    """
    n = len(window)
    if n < cfg.min_window:
        raise InsufficientDataError(
            f"window holds {n} samples; need at least {cfg.min_window}"
        )
    qs = window.confidences()
    prefix = np.concatenate(([0.0], np.cumsum(qs)))
    total = prefix[-1]
    gate = 1.0 - cfg.lambda_sens
    s_f = 0.0
    best_k: int | None = None
    for k in range(cfg.delta, n - cfg.delta + 1):
        m_r = prefix[k] / k
        m_t = (total - prefix[k]) / (n - k)
        if m_t <= gate * m_r:
            try:
                ref = beta_dist.fit_mle(qs[:k])
                tgt = beta_dist.fit_mle(qs[k:])
            except (DegenerateSampleError, InsufficientDataError):
                continue
            target = qs[k:]
            s_k = float(np.sum(beta_dist.log_pdf(tgt, target) - beta_dist.log_pdf(ref, target)))
            if s_k > s_f:
                s_f = s_k
                best_k = k
    return DriftReport(
        detected=s_f > cfg.threshold,
        score_sf=s_f,
        threshold_th=cfg.threshold,
        change_index=best_k,
        window_len=n,
    )


class DriftDetector:
    """Streaming wrapper: push every sample, scan the window on a fixed cadence.

    A detection clears the window — post-drift confidences belong to the new
    regime and stale evidence must not re-trigger. Single-owner mutable state;
    distinct instances are independent.
    """

    def __init__(self, cfg: DetectorConfig):
        self.cfg = cfg
        self.window = ConfidenceWindow(cfg.n_max)
        self.invocations = 0
        self._since_check = 0

    def step(self, label: int, q: float) -> DriftReport | None:
        """Push one (label, confidence) pair; return a report only on detection."""
        self.window.push(label, q)
        self._since_check += 1
        if self._since_check < self.cfg.check_stride:
            return None
        self._since_check = 0
        if len(self.window) < self.cfg.min_window:
            return None
        self.invocations += 1
        report = test_for_drift(self.window, self.cfg)
        if report.detected:
            self.window.clear()
            return report
        return None

    def reset(self) -> None:
        self.window.clear()
        self._since_check = 0
