"""Classifier evaluation: confusion matrices, accuracy/precision/recall/F1,
one-vs-rest ROC curves, AUC, and deterministic CSV/SVG report rendering.

Averaging across classes is macro (unweighted); undefined precision or
recall (0/0) counts as 0.  Both conventions are stamped into the CSV output
as a trailing comment so downstream readers cannot mistake them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateClass, EmptyMatrix, InconsistentDimensions, LabelOutOfRange,
    LengthMismatch,
)


@dataclass
class ConfusionMatrix:
    """K x K counts; entry (i, j) = samples of true class i predicted as j."""

    counts: np.ndarray
    class_names: list[str]

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.class_names)
        if self.counts.shape != (k, k):
            raise InconsistentDimensions(
                f"counts {self.counts.shape} vs {k} class names"
            )
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be non-negative")

    @property
    def k(self) -> int:
        return len(self.class_names)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class RocCurve:
    """Monotone (FPR, TPR) points from (0,0) to (1,1) for one positive class."""

    points: list[tuple[float, float]]
    positive_class: int

    def __post_init__(self) -> None:
        if not self.points or self.points[0] != (0.0, 0.0) or self.points[-1] != (1.0, 1.0):
            raise ValueError("curve must run from (0,0) to (1,1)")
        fprs = [p[0] for p in self.points]
        tprs = [p[1] for p in self.points]
        if any(b < a for a, b in zip(fprs, fprs[1:])) or any(b < a for a, b in zip(tprs, tprs[1:])):
            raise ValueError("curve points must be non-decreasing")


@dataclass
class MetricsReport:
    """Aggregate and per-class scores for one model."""

    model: str
    accuracy: float
    precision: float  # macro
    recall: float     # macro
    f1: float         # macro
    per_class: list[tuple[float, float, float]] = field(default_factory=list)
    per_class_auc: list[float] = field(default_factory=list)
    sample_count: int = 0


def confusion_matrix(true_labels, predicted_labels, k: int, class_names: list[str] | None = None) -> ConfusionMatrix:
    """Tally (true, predicted) pairs into a K x K matrix."""
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise LengthMismatch(f"label sequences {t.shape} vs {p.shape}")
    if t.size and not ((0 <= t).all() and (t < k).all() and (0 <= p).all() and (p < k).all()):
        raise LabelOutOfRange(f"labels must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    names = class_names if class_names is not None else [f"class_{i}" for i in range(k)]
    if len(names) != k:
        raise InconsistentDimensions(f"{len(names)} names for k={k}")
    return ConfusionMatrix(counts, list(names))


def summary_metrics(cm: ConfusionMatrix, model: str = "model") -> MetricsReport:
    """Accuracy, per-class precision/recall/F1, and their macro means.

    0/0 ratios are defined as 0.
    """
    if cm.total == 0:
        raise EmptyMatrix("cannot summarize an empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    diag = np.diag(counts)
    col_sums = counts.sum(axis=0)
    row_sums = counts.sum(axis=1)

    def safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)

    precision = safe_div(diag, col_sums)
    recall = safe_div(diag, row_sums)
    f1 = safe_div(2.0 * precision * recall, precision + recall)
    per_class = [(float(p), float(r), float(f)) for p, r, f in zip(precision, recall, f1)]
    return MetricsReport(
        model=model,
        accuracy=float(diag.sum() / cm.total),
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(f1.mean()),
        per_class=per_class,
        sample_count=cm.total,
    )


def roc_curve_ovr(scores, labels, positive_class: int) -> RocCurve:
    """One-vs-rest ROC: sweep a threshold down the distinct scores.

    ``scores`` are the predicted probabilities of ``positive_class`` per
    sample; ties share one point.  The curve always includes (0,0) and (1,1).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise LengthMismatch(f"scores {s.shape} vs labels {y.shape}")
    pos = y == positive_class
    n_pos = int(pos.sum())
    n_neg = int(s.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClass(
            f"class {positive_class} needs at least one positive and one negative sample"
        )
    points = [(0.0, 0.0)]
    for threshold in np.unique(s)[::-1]:
        predicted_pos = s >= threshold
        tp = int((predicted_pos & pos).sum())
        fp = int((predicted_pos & ~pos).sum())
        points.append((fp / n_neg, tp / n_pos))
    return RocCurve(points=points, positive_class=positive_class)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve over FPR."""
    fpr = np.array([p[0] for p in curve.points])
    tpr = np.array([p[1] for p in curve.points])
    return float((0.5 * (tpr[1:] + tpr[:-1]) * np.diff(fpr)).sum())


# --- rendering -----------------------------------------------------------------

_CELL = 34
_ROC_SIZE = 300
_MARGIN = 46
_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

CSV_HEADER = "model,accuracy,precision,recall,f1"


def metrics_csv(report: MetricsReport) -> str:
    lines = [
        CSV_HEADER,
        f"{report.model},{report.accuracy:.4f},{report.precision:.4f},"
        f"{report.recall:.4f},{report.f1:.4f}",
        "# averaging=macro; undefined precision/recall (0/0) counted as 0",
    ]
    return "\n".join(lines) + "\n"


def _heat_color(fraction: float) -> str:
    # white -> saturated blue
    r = int(round(255 - 205 * fraction))
    g = int(round(255 - 155 * fraction))
    b = 255
    return f"#{r:02x}{g:02x}{b:02x}"


def _svg_confusion(cm: ConfusionMatrix, x0: int, y0: int, parts: list[str]) -> None:
    k = cm.k
    peak = max(int(cm.counts.max()), 1)
    parts.append(f'<text x="{x0}" y="{y0 - 12}" font-size="13">Confusion matrix (rows = true)</text>')
    for i in range(k):
        for j in range(k):
            count = int(cm.counts[i, j])
            cx = x0 + j * _CELL
            cy = y0 + i * _CELL
            parts.append(
                f'<rect x="{cx}" y="{cy}" width="{_CELL}" height="{_CELL}" '
                f'fill="{_heat_color(count / peak)}" stroke="#666" stroke-width="0.5"/>'
            )
            parts.append(
                f'<text x="{cx + _CELL / 2:.1f}" y="{cy + _CELL / 2 + 4:.1f}" '
                f'font-size="10" text-anchor="middle">{count}</text>'
            )
    for i, name in enumerate(cm.class_names):
        parts.append(
            f'<text x="{x0 - 6}" y="{y0 + i * _CELL + _CELL / 2 + 4:.1f}" '
            f'font-size="9" text-anchor="end">{name}</text>'
        )
        parts.append(
            f'<text x="{x0 + i * _CELL + _CELL / 2:.1f}" y="{y0 + k * _CELL + 12}" '
            f'font-size="9" text-anchor="middle">{name}</text>'
        )


def _svg_roc(curves: list[RocCurve], aucs: list[float], x0: int, y0: int, parts: list[str]) -> None:
    parts.append(f'<text x="{x0}" y="{y0 - 12}" font-size="13">One-vs-rest ROC</text>')
    parts.append(
        f'<rect x="{x0}" y="{y0}" width="{_ROC_SIZE}" height="{_ROC_SIZE}" '
        f'fill="none" stroke="#000" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{x0}" y1="{y0 + _ROC_SIZE}" x2="{x0 + _ROC_SIZE}" y2="{y0}" '
        f'stroke="#999" stroke-dasharray="4 3" stroke-width="1"/>'
    )
    for idx, (curve, area) in enumerate(zip(curves, aucs)):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(
            f"{x0 + fpr * _ROC_SIZE:.2f},{y0 + (1.0 - tpr) * _ROC_SIZE:.2f}"
            for fpr, tpr in curve.points
        )
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{x0 + _ROC_SIZE + 10}" y="{y0 + 14 + idx * 14}" font-size="10" '
            f'fill="{color}">class {curve.positive_class}: AUC {area:.4f}</text>'
        )


def render_report(
    report: MetricsReport, cm: ConfusionMatrix, curves: list[RocCurve]
) -> tuple[str, str]:
    """CSV row plus an SVG with the confusion heat grid and ROC curves.

    Output is byte-deterministic for identical inputs.
    """
    if len(report.per_class) not in (0, cm.k):
        raise InconsistentDimensions(
            f"{len(report.per_class)} per-class entries for k={cm.k}"
        )
    for curve in curves:
        if not 0 <= curve.positive_class < cm.k:
            raise InconsistentDimensions(
                f"curve class {curve.positive_class} outside k={cm.k}"
            )
    aucs = [auc(c) for c in curves]

    width = _MARGIN * 2 + cm.k * _CELL + (_ROC_SIZE + 170 if curves else 0)
    height = _MARGIN * 2 + max(cm.k * _CELL, _ROC_SIZE if curves else 0) + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace">',
        f'<text x="{_MARGIN}" y="18" font-size="14">{report.model}: '
        f'accuracy {report.accuracy:.4f}</text>',
    ]
    _svg_confusion(cm, _MARGIN + 30, _MARGIN + 10, parts)
    if curves:
        _svg_roc(curves, aucs, _MARGIN + 30 + cm.k * _CELL + 60, _MARGIN + 10, parts)
    parts.append("</svg>")
    return metrics_csv(report), "\n".join(parts) + "\n"
