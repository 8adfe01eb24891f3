"""Detection metrics: confusion counts, ranking curves, low-FPR operating
points, and probability calibration.

Semantics pinned for reproducibility:
- ROC-AUC is the tie-aware rank statistic (ties earn half credit).
- AUPRC uses step interpolation, precision held right-constant between
  recall steps; trapezoids would report different numbers.
- TPR@FPR sweeps thresholds over the unique score values (plus a reject-
  everything sentinel) with the predict-positive rule score >= threshold.
- Calibration bins are equal width over [0,1], last bin right-inclusive;
  bin accuracy is the empirical attack frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .util import write_delimited

N_RELIABILITY_BINS = 15


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class PointMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()  # zero-denominator metrics reported as 0


def confusion_and_point_metrics(
    labels: np.ndarray, predictions: np.ndarray
) -> tuple[ConfusionCounts, PointMetrics]:
    labels = np.asarray(labels).ravel()
    predictions = np.asarray(predictions).ravel()
    if labels.shape != predictions.shape:
        raise ValueError("labels and predictions differ in length")
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    tn = int(np.sum((predictions == 0) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))
    counts = ConfusionCounts(tp, fp, tn, fn)

    flags = []
    accuracy = (tp + tn) / labels.size
    if tp + fp == 0:
        precision, flags = 0.0, flags + ["precision"]
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall, flags = 0.0, flags + ["recall"]
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1, flags = 0.0, flags + ["f1"]
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return counts, PointMetrics(accuracy, precision, recall, f1, tuple(flags))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _check_two_classes(labels: np.ndarray) -> None:
    if np.unique(labels).size < 2:
        raise ValueError("metric needs both classes present")


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    _check_two_classes(labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    ranks = _average_ranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    _check_two_classes(labels)
    desc = np.argsort(-scores, kind="stable")
    y = (labels[desc] == 1).astype(np.float64)
    s = scores[desc]
    tp = np.cumsum(y)
    predicted = np.arange(1, y.size + 1)
    # thresholds sit at boundaries between distinct score values
    boundary = np.append(s[:-1] != s[1:], True)
    tp_b = tp[boundary]
    pred_b = predicted[boundary]
    recall = tp_b / tp[-1]
    precision = tp_b / pred_b
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def roc_points(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) at each unique score plus the reject-all sentinel."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    points = [(np.inf, 0.0, 0.0)]
    for t in np.unique(scores)[::-1]:
        pred = scores >= t
        tpr = float(np.sum(pred & pos)) / n_pos if n_pos else 0.0
        fpr = float(np.sum(pred & ~pos)) / n_neg if n_neg else 0.0
        points.append((float(t), fpr, tpr))
    return points


def pr_points(scores: np.ndarray, labels: np.ndarray) -> list[tuple[float, float, float]]:
    """(threshold, recall, precision) at each unique score value."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pos = labels == 1
    n_pos = int(pos.sum())
    points = []
    for t in np.unique(scores)[::-1]:
        pred = scores >= t
        tp = int(np.sum(pred & pos))
        points.append((float(t), tp / n_pos if n_pos else 0.0, tp / int(pred.sum())))
    return points


def tpr_at_fpr(scores: np.ndarray, labels: np.ndarray, fpr_cap: float) -> float:
    """Best TPR among thresholds with empirical FPR at or below the cap."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    _check_two_classes(labels)
    best = 0.0
    for _, fpr, tpr in roc_points(scores, labels):
        if fpr <= fpr_cap and tpr > best:
            best = tpr
    return float(best)


def brier(probs: np.ndarray, labels: np.ndarray) -> float:
    probs = np.asarray(probs, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValueError("probabilities must lie in [0,1]")
    return float(np.mean((probs - labels) ** 2))


@dataclass
class ReliabilityBin:
    lo: float
    hi: float
    count: int
    confidence: float  # mean predicted probability; 0 for empty bins
    accuracy: float  # empirical attack frequency; 0 for empty bins


def ece(
    probs: np.ndarray, labels: np.ndarray, n_bins: int = N_RELIABILITY_BINS
) -> tuple[float, list[ReliabilityBin]]:
    probs = np.asarray(probs, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValueError("probabilities must lie in [0,1]")
    idx = np.minimum((probs * n_bins).astype(np.int64), n_bins - 1)
    total = 0.0
    bins = []
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        if count:
            conf = float(probs[mask].mean())
            acc = float(labels[mask].mean())
            total += (count / probs.size) * abs(acc - conf)
        else:
            conf = acc = 0.0
        bins.append(ReliabilityBin(b / n_bins, (b + 1) / n_bins, count, conf, acc))
    return float(total), bins


# ---------------------------------------------------------------------------
# report assembly


@dataclass
class EvalReport:
    name: str
    counts: ConfusionCounts
    point: PointMetrics
    roc_auc: float
    pr_auc: float
    tpr_at_tenth_percent_fpr: float
    tpr_at_one_percent_fpr: float
    brier: float
    ece: float
    reliability: list[ReliabilityBin] = field(default_factory=list)


def evaluate(
    name: str, labels: np.ndarray, probs: np.ndarray, predictions: np.ndarray | None = None
) -> EvalReport:
    """Full metric suite from attack probabilities.

    Decisions default to thresholding the probabilities at 0.5; callers with
    a separate decision rule (forest majority vote) pass predictions in.
    """
    labels = np.asarray(labels).ravel()
    probs = np.asarray(probs, dtype=np.float64).ravel()
    if predictions is None:
        predictions = (probs >= 0.5).astype(np.int64)
    else:
        predictions = np.asarray(predictions).ravel().astype(np.int64)
    counts, point = confusion_and_point_metrics(labels, predictions)
    ece_value, bins = ece(probs, labels)
    return EvalReport(
        name=name,
        counts=counts,
        point=point,
        roc_auc=roc_auc(probs, labels),
        pr_auc=pr_auc(probs, labels),
        tpr_at_tenth_percent_fpr=tpr_at_fpr(probs, labels, 0.001),
        tpr_at_one_percent_fpr=tpr_at_fpr(probs, labels, 0.01),
        brier=brier(probs, labels),
        ece=ece_value,
        reliability=bins,
    )


def report_rows(report: EvalReport) -> list[tuple[str, float]]:
    return [
        ("tp", report.counts.tp),
        ("fp", report.counts.fp),
        ("tn", report.counts.tn),
        ("fn", report.counts.fn),
        ("accuracy", report.point.accuracy),
        ("precision", report.point.precision),
        ("recall", report.point.recall),
        ("f1", report.point.f1),
        ("roc_auc", report.roc_auc),
        ("pr_auc", report.pr_auc),
        ("tpr_at_0.1pct_fpr", report.tpr_at_tenth_percent_fpr),
        ("tpr_at_1pct_fpr", report.tpr_at_one_percent_fpr),
        ("brier", report.brier),
        ("ece", report.ece),
    ]


def write_report(path: str | Path, report: EvalReport) -> None:
    write_delimited(path, ("metric", "value"), report_rows(report))


def write_curves(out_dir: str | Path, name: str, labels, probs) -> None:
    """Plot-ready ROC, PR, and reliability tables for one scored model."""
    out_dir = Path(out_dir)
    write_delimited(
        out_dir / f"roc_{name}.csv", ("threshold", "fpr", "tpr"), roc_points(probs, labels)
    )
    write_delimited(
        out_dir / f"pr_{name}.csv", ("threshold", "recall", "precision"), pr_points(probs, labels)
    )
    _, bins = ece(probs, labels)
    write_delimited(
        out_dir / f"reliability_{name}.csv",
        ("bin_lo", "bin_hi", "count", "confidence", "accuracy"),
        [(b.lo, b.hi, b.count, b.confidence, b.accuracy) for b in bins],
    )
