"""Confusion-matrix accounting and the three challenge IoU aggregates."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .data import Sample, pack_batch
from .errors import ClassOutOfRange, DimensionMismatch, MissingTargetError, NoScoredPixels
from .geometry import BoundaryImage, pad_to_multiple
from .nn.model import ModelParams, forward, predict
from .palette import ClassPalette

AGGREGATIONS = ("micro", "macro")


def new_confusion(num_classes: int) -> np.ndarray:
    return np.zeros((num_classes, num_classes), dtype=np.int64)


def confusion_accumulate(cm: np.ndarray, pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """cm[t][p] += pixels with ground truth t predicted p; returns a new matrix."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    c = cm.shape[0]
    for name, arr in (("pred", pred), ("gt", gt)):
        if arr.size and (arr.min() < 0 or arr.max() >= c):
            raise ClassOutOfRange(f"{name} values outside [0, {c})")
    joint = np.bincount(gt.ravel().astype(np.int64) * c + pred.ravel(), minlength=c * c)
    return cm + joint.reshape(c, c)


def iou_per_class(cm: np.ndarray) -> np.ndarray:
    """Diagonal over (row + column - diagonal); NaN when a class never occurs."""
    diag = np.diag(cm).astype(np.float64)
    denom = cm.sum(axis=1) + cm.sum(axis=0) - np.diag(cm)
    out = np.full(cm.shape[0], np.nan)
    present = denom > 0
    out[present] = diag[present] / denom[present]
    return out


def pixel_accuracy(cm: np.ndarray) -> float:
    total = int(cm.sum())
    if total == 0:
        raise NoScoredPixels("confusion matrix is empty")
    return float(np.diag(cm).sum() / total)


@dataclass(frozen=True)
class MetricsReport:
    per_class_iou: tuple[Optional[float], ...]
    iou_with_bg: Optional[float]
    iou_without_bg: Optional[float]
    iou_structure: Optional[float]
    pixels: int
    aggregation: str = "micro"

    def to_dict(self, palette: ClassPalette) -> dict:
        return {
            "per_class": {
                palette.entry(i).name: self.per_class_iou[i]
                for i in range(len(self.per_class_iou))
            },
            "iou_with_bg": self.iou_with_bg,
            "iou_without_bg": self.iou_without_bg,
            "iou_structure": self.iou_structure,
            "pixels": self.pixels,
            "aggregation": self.aggregation,
        }


def _nan_to_none(v: float) -> Optional[float]:
    return None if math.isnan(v) else float(v)


def challenge_metrics(cm: np.ndarray, palette: ClassPalette, aggregation: str = "micro") -> MetricsReport:
    """Mean IoU with/without background plus the structure class's own IoU.

    Classes absent from both prediction and ground truth are excluded from
    the means rather than scored zero.
    """
    total = int(cm.sum())
    if total == 0:
        raise NoScoredPixels("no pixels were scored")
    ious = iou_per_class(cm)
    defined = ~np.isnan(ious)
    with_bg = float(ious[defined].mean()) if defined.any() else math.nan
    wo = defined.copy()
    wo[palette.background_id] = False
    without_bg = float(ious[wo].mean()) if wo.any() else math.nan
    structure = ious[palette.structure_id]
    return MetricsReport(
        per_class_iou=tuple(_nan_to_none(v) for v in ious),
        iou_with_bg=_nan_to_none(with_bg),
        iou_without_bg=_nan_to_none(without_bg),
        iou_structure=_nan_to_none(structure),
        pixels=total,
        aggregation=aggregation,
    )


# ---------------------------------------------------------------------------
# Dataset-level evaluation
# ---------------------------------------------------------------------------

Predictor = Callable[[Sample], np.ndarray]


def make_predictor(params: ModelParams, palette: ClassPalette) -> Predictor:
    """Native-resolution prediction: pad to the stage multiple, crop back."""
    div = 1 << params.config.stages

    def run(sample: Sample) -> np.ndarray:
        padded, (h, w) = pad_to_multiple(sample.boundary.channels, div)
        batch = pack_batch(
            [Sample(sample.id, BoundaryImage(padded), sample.graph)],
            (padded.shape[1], padded.shape[2]),
            palette,
        )
        probs = forward(params, batch)
        return predict(probs)[0, :h, :w]

    return run


def _as_predictor(model: Union[ModelParams, Predictor], palette: ClassPalette) -> Predictor:
    if isinstance(model, ModelParams):
        return make_predictor(model, palette)
    return model


def confusion_from_samples(
    model: Union[ModelParams, Predictor],
    samples: Sequence[Sample],
    palette: ClassPalette,
) -> np.ndarray:
    predictor = _as_predictor(model, palette)
    cm = new_confusion(palette.num_classes)
    for s in samples:
        if s.target is None:
            raise MissingTargetError(f"sample {s.id} has no ground truth")
        cm = confusion_accumulate(cm, predictor(s), s.target)
    return cm


def evaluate_dataset(
    model: Union[ModelParams, Predictor],
    samples: Sequence[Sample],
    palette: ClassPalette,
    aggregation: str = "micro",
) -> tuple[MetricsReport, list[dict]]:
    """Dataset-level metrics plus one row per sample for error analysis.

    micro accumulates one confusion matrix over all pixels; macro averages
    the per-sample aggregates instead.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}")
    if not samples:
        raise NoScoredPixels("no samples to evaluate")
    predictor = _as_predictor(model, palette)
    total_cm = new_confusion(palette.num_classes)
    rows = []
    per_sample_reports = []
    for s in samples:
        if s.target is None:
            raise MissingTargetError(f"sample {s.id} has no ground truth")
        cm = confusion_accumulate(new_confusion(palette.num_classes), predictor(s), s.target)
        total_cm += cm
        rep = challenge_metrics(cm, palette)
        per_sample_reports.append(rep)
        rows.append(
            {
                "id": s.id,
                "pixels": rep.pixels,
                "accuracy": pixel_accuracy(cm),
                "iou_with_bg": rep.iou_with_bg,
                "iou_without_bg": rep.iou_without_bg,
                "iou_structure": rep.iou_structure,
            }
        )
    if aggregation == "micro":
        report = challenge_metrics(total_cm, palette)
    else:
        report = _macro_mean(per_sample_reports, total_cm, palette)
    return report, rows


def _macro_mean(reports: Sequence[MetricsReport], total_cm: np.ndarray, palette: ClassPalette) -> MetricsReport:
    def mean_defined(values) -> Optional[float]:
        vals = [v for v in values if v is not None]
        return float(np.mean(vals)) if vals else None

    num_classes = palette.num_classes
    per_class = tuple(
        mean_defined(r.per_class_iou[c] for r in reports) for c in range(num_classes)
    )
    return MetricsReport(
        per_class_iou=per_class,
        iou_with_bg=mean_defined(r.iou_with_bg for r in reports),
        iou_without_bg=mean_defined(r.iou_without_bg for r in reports),
        iou_structure=mean_defined(r.iou_structure for r in reports),
        pixels=int(total_cm.sum()),
        aggregation="macro",
    )


def write_report(report: MetricsReport, rows: Sequence[dict], palette: ClassPalette, out_dir: Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "metrics.json"
    report_path.write_text(json.dumps(report.to_dict(palette), indent=2), encoding="utf-8")
    if rows:
        with (out / "per_sample.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return report_path
