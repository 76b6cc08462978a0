"""Mean IoU with the both-empty = 1, one-empty = 0 conventions."""

from __future__ import annotations

import numpy as np


def _iou(pred: np.ndarray, gt: np.ndarray) -> float:
    p, g = pred.astype(bool), gt.astype(bool)
    union = np.logical_or(p, g).sum()
    if union == 0:
        return 1.0  # both empty
    if p.sum() == 0 or g.sum() == 0:
        return 0.0  # one empty
    return float(np.logical_and(p, g).sum() / union)


def compute_miou(pred_masks, gt_masks, n_classes: int) -> float:
    """Binary: foreground IoU averaged over images. Multiclass: per-class IoU
    (background excluded) over classes present in gt or pred, averaged per
    image then over images."""
    if len(pred_masks) != len(gt_masks):
        raise ValueError("pred/gt count mismatch")
    per_image = []
    for pred, gt in zip(pred_masks, gt_masks):
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise ValueError(f"shape mismatch {pred.shape} vs {gt.shape}")
        if pred.max(initial=0) >= n_classes or gt.max(initial=0) >= n_classes:
            raise ValueError("label outside n_classes")
        if n_classes == 2:
            per_image.append(_iou(pred > 0, gt > 0))
            continue
        class_ious = []
        for cls in range(1, n_classes):
            p, g = pred == cls, gt == cls
            if not p.any() and not g.any():
                continue  # absent class does not dilute the mean
            class_ious.append(_iou(p, g))
        per_image.append(float(np.mean(class_ious)) if class_ious else 1.0)
    return float(np.mean(per_image))
