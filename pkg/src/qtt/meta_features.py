"""Dataset descriptors conditioning the predictors.

Seven cheap, label-derived statistics summarize an (image, mask) collection.
They are standardized against the meta-training datasets before entering the
predictors; counts and pixel dimensions pass through log1p first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

FIELD_NAMES = (
    "n_images",
    "n_classes",
    "mean_height",
    "mean_width",
    "mean_foreground_fraction",
    "mean_instances_per_image",
    "channel_count",
)
# Count- and pixel-scaled dimensions are log1p-compressed before standardizing.
_LOG1P_MASK = np.array([True, False, True, True, False, False, False])

N_FEATURES = len(FIELD_NAMES)


@dataclass(frozen=True)
class MetaFeatures:
    n_images: int
    n_classes: int
    mean_height: float
    mean_width: float
    mean_foreground_fraction: float
    mean_instances_per_image: float
    channel_count: int

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FIELD_NAMES], dtype=np.float64)

    def to_json_dict(self) -> dict:
        d = {name: getattr(self, name) for name in FIELD_NAMES}
        return {k: (int(v) if isinstance(v, (int, np.integer)) else float(v)) for k, v in d.items()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetaFeatures":
        return cls(**{name: d[name] for name in FIELD_NAMES})


@dataclass(frozen=True)
class MetaStats:
    """Per-dimension mean/std over the meta-training datasets (post log1p)."""

    mean: np.ndarray
    std: np.ndarray

    def to_json_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MetaStats":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def _normalize_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    values = np.unique(mask)
    if values.size and values.max() == 255 and np.isin(values, (0, 255)).all():
        return (mask == 255).astype(np.int32)  # binary 0/255 convention
    return mask.astype(np.int32)


def extract(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> MetaFeatures:
    """Compute the descriptor over (image, mask) pairs.

    Masks are 2-D label maps (0 = background; 0/255 binary accepted). Instances
    are connected foreground components counted per class. Raises on an empty
    collection or an image/mask shape mismatch.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty dataset")
    heights, widths, fg_fractions, instance_counts, channels = [], [], [], [], []
    max_label = 1
    for image, mask in pairs:
        image = np.asarray(image)
        mask = _normalize_mask(mask)
        if image.shape[:2] != mask.shape:
            raise ValueError(f"image/mask shape mismatch: {image.shape[:2]} vs {mask.shape}")
        heights.append(mask.shape[0])
        widths.append(mask.shape[1])
        channels.append(1 if image.ndim == 2 else image.shape[2])
        fg_fractions.append(float((mask > 0).mean()))
        labels = np.unique(mask)
        labels = labels[labels > 0]
        if labels.size:
            max_label = max(max_label, int(labels.max()))
        n_components = 0
        for label in labels:
            _, count = ndimage.label(mask == label)
            n_components += count
        instance_counts.append(n_components)
    return MetaFeatures(
        n_images=len(pairs),
        n_classes=max_label + 1,
        mean_height=float(np.mean(heights)),
        mean_width=float(np.mean(widths)),
        mean_foreground_fraction=float(np.mean(fg_fractions)),
        mean_instances_per_image=float(np.mean(instance_counts)),
        channel_count=int(max(channels)),
    )


def _transform(raw: np.ndarray) -> np.ndarray:
    out = raw.astype(np.float64).copy()
    out[..., _LOG1P_MASK] = np.log1p(out[..., _LOG1P_MASK])
    return out


def fit_stats(features: Iterable[MetaFeatures]) -> MetaStats:
    """Population mean/std per dimension, std floored at 1e-8."""
    rows = [f.as_array() for f in features]
    if not rows:
        raise ValueError("empty feature list")
    x = _transform(np.stack(rows))
    std = np.maximum(x.std(axis=0), 1e-8)
    return MetaStats(mean=x.mean(axis=0), std=std)


def normalize(features: MetaFeatures, stats: MetaStats) -> np.ndarray:
    """Standardized vector: (log1p-transformed features - mean) / std."""
    if stats.mean.shape != (N_FEATURES,):
        raise ValueError(f"stats dimension {stats.mean.shape} != {N_FEATURES}")
    return (_transform(features.as_array()) - stats.mean) / stats.std
