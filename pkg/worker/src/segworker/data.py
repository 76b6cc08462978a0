"""Dataset loading (images/*.png + masks/*.png, filename-matched) and the
deterministic toy dataset generator used for CPU-only runs."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .prompts import normalize_mask


def load_dataset(path: str | Path, subsample_n: int | None, seed: int):
    """[(image HxWx3 float32 in [0,1], mask HxW int32)] for the seeded subsample."""
    root = Path(path)
    image_dir, mask_dir = root / "images", root / "masks"
    names = sorted(p.name for p in image_dir.glob("*.png"))
    if not names:
        raise FileNotFoundError(f"no images under {image_dir}")
    missing = [n for n in names if not (mask_dir / n).exists()]
    if missing:
        raise FileNotFoundError(f"masks missing for {missing[:3]}")
    if subsample_n is not None and subsample_n < len(names):
        rng = np.random.default_rng(seed)
        keep = sorted(rng.choice(len(names), subsample_n, replace=False))
        names = [names[i] for i in keep]
    pairs = []
    for name in names:
        image = np.asarray(Image.open(image_dir / name).convert("RGB"), dtype=np.float32) / 255.0
        mask = normalize_mask(np.asarray(Image.open(mask_dir / name)))
        if image.shape[:2] != mask.shape:
            raise ValueError(f"{name}: image/mask shape mismatch")
        pairs.append((image, mask))
    return pairs


def train_val_split(pairs, seed: int, val_fraction: float = 0.2):
    """Seeded 80/20 split; val is never empty for non-trivial datasets."""
    n = len(pairs)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_val = max(1, int(round(val_fraction * n))) if n > 1 else 0
    val_idx = set(order[:n_val].tolist())
    train = [pairs[i] for i in range(n) if i not in val_idx]
    val = [pairs[i] for i in range(n) if i in val_idx]
    return train, val


def generate_toy_dataset(out_dir: str | Path, n_images: int = 20, size: int = 64,
                         seed: int = 0) -> Path:
    """Bright blobs on dark noise with exact masks; learnable by construction."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_images):
        image = rng.uniform(0.0, 0.25, size=(size, size, 3))
        mask = np.zeros((size, size), dtype=np.uint8)
        for _ in range(int(rng.integers(1, 4))):
            h = int(rng.integers(8, size // 2))
            w = int(rng.integers(8, size // 2))
            y = int(rng.integers(0, size - h))
            x = int(rng.integers(0, size - w))
            color = rng.uniform(0.6, 1.0, size=3)
            image[y:y + h, x:x + w] = color + rng.normal(0, 0.03, size=(h, w, 3))
            mask[y:y + h, x:x + w] = 255
        Image.fromarray((np.clip(image, 0, 1) * 255).astype(np.uint8)).save(
            out / "images" / f"toy_{i:03d}.png")
        Image.fromarray(mask).save(out / "masks" / f"toy_{i:03d}.png")
    return out
