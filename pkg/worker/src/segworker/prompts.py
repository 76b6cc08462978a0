"""Box prompts from ground-truth masks: one tight box per connected
component per class, each edge jittered to simulate noisy prompts."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

JITTER_AMPLITUDE = 0.05  # fraction of the box's own width/height per edge


def normalize_mask(mask: np.ndarray) -> np.ndarray:
    """Label map with background 0; accepts the 0/255 binary convention."""
    mask = np.asarray(mask)
    if mask.ndim == 3:
        mask = mask[..., 0]
    values = np.unique(mask)
    if values.size and values.max() == 255 and np.isin(values, (0, 255)).all():
        return (mask == 255).astype(np.int32)
    return mask.astype(np.int32)


def build_prompts(gt_mask: np.ndarray, jitter_seed: int,
                  amplitude: float = JITTER_AMPLITUDE) -> list[tuple[int, tuple[float, float, float, float]]]:
    """(class_id, (x0, y0, x1, y1)) per connected foreground component.

    Each box edge shifts by uniform noise within +-amplitude of the box's
    corresponding dimension (floored at 1 px when amplitude > 0), clipped to
    image bounds. amplitude 0 reproduces the exact tight boxes. Deterministic
    per seed; an empty mask yields an empty list.
    """
    mask = normalize_mask(gt_mask)
    height, width = mask.shape
    rng = np.random.default_rng(jitter_seed)
    boxes = []
    for class_id in np.unique(mask):
        if class_id == 0:
            continue
        labeled, count = ndimage.label(mask == class_id)
        for component in range(1, count + 1):
            ys, xs = np.nonzero(labeled == component)
            x0, x1 = float(xs.min()), float(xs.max() + 1)
            y0, y1 = float(ys.min()), float(ys.max() + 1)
            if amplitude > 0:
                amp_x = max(amplitude * (x1 - x0), 1.0)
                amp_y = max(amplitude * (y1 - y0), 1.0)
                shifts = rng.uniform(-1.0, 1.0, size=4)
                x0 += shifts[0] * amp_x
                x1 += shifts[1] * amp_x
                y0 += shifts[2] * amp_y
                y1 += shifts[3] * amp_y
            x0, x1 = sorted((min(max(x0, 0.0), width), min(max(x1, 0.0), width)))
            y0, y1 = sorted((min(max(y0, 0.0), height), min(max(y1, 0.0), height)))
            boxes.append((int(class_id), (x0, y0, x1, y1)))
    return boxes


def rasterize_boxes(boxes, shape, class_id=None) -> np.ndarray:
    """Binary HxW map of the (optionally class-filtered) box union."""
    out = np.zeros(shape, dtype=np.float32)
    for cls, (x0, y0, x1, y1) in boxes:
        if class_id is not None and cls != class_id:
            continue
        xi0, yi0 = int(np.floor(x0)), int(np.floor(y0))
        xi1, yi1 = int(np.ceil(x1)), int(np.ceil(y1))
        out[max(yi0, 0):max(yi1, 0), max(xi0, 0):max(xi1, 0)] = 1.0
    return out
