"""Segmentation metrics from a confusion matrix over valid pixels."""

from __future__ import annotations

import numpy as np

from .grid import RasterGrid, SampleKind


def confusion_counts(pred: RasterGrid, gt: RasterGrid) -> dict[tuple[int, int], int]:
    """Counts of (gt_class, pred_class) over pixels valid in both rasters."""
    if pred.kind != SampleKind.LABEL or gt.kind != SampleKind.LABEL:
        raise ValueError("metrics run over label grids")
    if pred.samples.shape != gt.samples.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.samples.shape} vs gt {gt.samples.shape}"
        )
    both = pred.valid_mask() & gt.valid_mask()
    g = np.asarray(gt.samples)[both].astype(np.int64)
    p = np.asarray(pred.samples)[both].astype(np.int64)
    pairs, counts = np.unique(np.stack([g, p], axis=1), axis=0, return_counts=True)
    return {(int(a), int(b)): int(n) for (a, b), n in zip(pairs, counts)}


def merge_confusions(parts: list[dict[tuple[int, int], int]]) -> dict[tuple[int, int], int]:
    merged: dict[tuple[int, int], int] = {}
    for part in parts:
        for key, n in part.items():
            merged[key] = merged.get(key, 0) + n
    return merged


def metrics_from_confusion(confusion: dict[tuple[int, int], int]) -> dict:
    """Per-class accuracy and IoU plus their means.

    Accuracy (recall) is defined for classes present in the ground truth;
    mAcc averages over those. IoU is defined for classes present in either
    raster; mIoU averages over that union, so spurious predicted classes
    pull the mean down instead of vanishing.
    """
    gt_classes = sorted({g for g, _ in confusion})
    all_classes = sorted({c for pair in confusion for c in pair})
    per_class_acc: dict[int, float] = {}
    for c in gt_classes:
        total = sum(n for (g, _), n in confusion.items() if g == c)
        per_class_acc[c] = confusion.get((c, c), 0) / total
    per_class_iou: dict[int, float] = {}
    for c in all_classes:
        tp = confusion.get((c, c), 0)
        gt_total = sum(n for (g, _), n in confusion.items() if g == c)
        pred_total = sum(n for (_, p), n in confusion.items() if p == c)
        union = gt_total + pred_total - tp
        per_class_iou[c] = tp / union if union else 0.0
    if not gt_classes:
        raise ValueError("empty confusion matrix")
    return {
        "per_class_accuracy": per_class_acc,
        "per_class_iou": per_class_iou,
        "macc": sum(per_class_acc.values()) / len(per_class_acc),
        "miou": sum(per_class_iou.values()) / len(per_class_iou),
        "pixels": sum(confusion.values()),
    }
