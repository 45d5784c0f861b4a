"""Confusion-based metrics and per-category report tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .categories import CATEGORY_NAMES, ActionabilityType


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float


def confusion(predictions: Sequence[int], golds: Sequence[int]) -> Confusion:
    if len(predictions) != len(golds):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(golds)} golds")
    if not predictions:
        raise ValueError("cannot build a confusion matrix from no predictions")
    tp = fp = tn = fn = 0
    for p, g in zip(predictions, golds):
        if g > 0:
            if p > 0:
                tp += 1
            else:
                fn += 1
        else:
            if p > 0:
                fp += 1
            else:
                tn += 1
    return Confusion(tp, fp, tn, fn)


def metrics(c: Confusion) -> MetricsReport:
    """Accuracy, precision, recall, F1 with zero-denominator cases mapped to 0."""
    if c.total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = (c.tp + c.tn) / c.total
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsReport(accuracy, precision, recall, f1)


def _pct(v: float) -> str:
    return f"{v * 100:.2f}%"


def report_table(
    reports: Mapping[ActionabilityType, MetricsReport],
    baseline_f1: Mapping[ActionabilityType, float],
) -> tuple[str, str]:
    """Render the per-category performance table.

    Returns (formatted text table, machine-readable CSV twin).  Rows follow
    the fixed category order; all values are shown, including categories
    where the baseline beats the model.
    """
    missing = [c for c in ActionabilityType if c not in reports or c not in baseline_f1]
    if missing:
        raise ValueError(f"missing categories: {[c.code for c in missing]}")
    name_width = max(len(CATEGORY_NAMES[c]) for c in ActionabilityType)
    lines = [
        f"{'Class':<{name_width}}  {'Accuracy':>9} {'F1':>8} {'Recall':>8} {'Baseline F1':>12}"
    ]
    csv_lines = ["category,accuracy,f1,recall,baseline_f1"]
    for c in ActionabilityType:
        r = reports[c]
        lines.append(
            f"{CATEGORY_NAMES[c]:<{name_width}}  {_pct(r.accuracy):>9} {_pct(r.f1):>8} "
            f"{_pct(r.recall):>8} {_pct(baseline_f1[c]):>12}"
        )
        csv_lines.append(
            f"{CATEGORY_NAMES[c]},{r.accuracy:.6f},{r.f1:.6f},{r.recall:.6f},{baseline_f1[c]:.6f}"
        )
    return "\n".join(lines) + "\n", "\n".join(csv_lines) + "\n"
