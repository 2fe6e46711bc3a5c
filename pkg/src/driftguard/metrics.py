"""Accuracy-matrix bookkeeping and continual-learning summary metrics."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputDomainError, ProtocolError


class AccuracyMatrix:
    """Write-once lower-triangular store of a[t][i], 1 <= i <= t."""

    def __init__(self):
        self._cells: dict[tuple[int, int], float] = {}

    def record(self, t: int, i: int, acc: float) -> None:
        if t < 1 or i < 1 or i > t:
            raise ProtocolError(f"cell (t={t}, i={i}) outside the lower triangle")
        if not 0.0 <= acc <= 1.0:
            raise InputDomainError(f"accuracy {acc!r} outside [0, 1]")
        if (t, i) in self._cells:
            raise ProtocolError(f"cell (t={t}, i={i}) already written")
        self._cells[(t, i)] = float(acc)

    def get(self, t: int, i: int) -> float:
        try:
            return self._cells[(t, i)]
        except KeyError:
            raise ProtocolError(f"cell (t={t}, i={i}) never written") from None

    def row(self, t: int) -> list[float]:
        return [self.get(t, i) for i in range(1, t + 1)]

    def max_row(self) -> int:
        return max((t for t, _ in self._cells), default=0)

    def rows(self) -> list[list[float]]:
        return [self.row(t) for t in range(1, self.max_row() + 1)]


def average_accuracy(matrix: AccuracyMatrix, t_final: int) -> float:
    """Mean of the final row: (1/T) * sum_i a[T][i]."""
    if t_final < 1:
        raise ProtocolError("average_accuracy needs T >= 1")
    return sum(matrix.row(t_final)) / t_final


def average_forgetting(matrix: AccuracyMatrix, t_final: int) -> float:
    """Mean peak-minus-final gap over tasks 1..T-1; zero by convention at T=1."""
    if t_final < 1:
        raise ProtocolError("average_forgetting needs T >= 1")
    if t_final == 1:
        matrix.row(1)
        return 0.0
    for t in range(1, t_final + 1):
        matrix.row(t)
    total = 0.0
    for i in range(1, t_final):
        peak = max(matrix.get(t, i) for t in range(i, t_final))
        total += peak - matrix.get(t_final, i)
    return total / (t_final - 1)


@dataclass
class CostLedger:
    """Adaptation-cost counters; all monotone nondecreasing over a run."""

    gradient_updates: int = 0
    fine_tune_events: int = 0
    detector_invocations: int = 0

    def as_dict(self) -> dict:
        return {
            "gradient_updates": self.gradient_updates,
            "fine_tune_events": self.fine_tune_events,
            "detector_invocations": self.detector_invocations,
        }
