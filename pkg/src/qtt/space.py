"""Fine-tuning configuration space: definition, validation, sampling, counting, encoding.

The space is a conditional discrete grid: LoRA settings exist only when LoRA is
enabled, and each learning-rate scheduler carries its own parameter grid.
Optimizer (AdamW), loss (BCE + Dice) and the LoRA injection target (image
encoder attention & MLP layers) are fixed choices, not searched dimensions.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

OPTIMIZER = "AdamW"
LOSS_FUNCTION = "BCE + Dice"
LORA_TARGET = "image encoder attention & MLP layers"

LEARNING_RATES = (
    1e-5, 1.2e-5, 1.5e-5, 2e-5, 2.5e-5, 3.5e-5, 5e-5, 6e-5, 6.5e-5,
    0.0001, 0.00012, 0.00018, 0.00025, 0.00032, 0.0004, 0.00048, 0.0005,
    0.00055, 0.0008, 0.001, 0.0015, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007,
)
WEIGHT_DECAYS = (0.0, 1e-5, 5e-5, 1e-4)
LORA_RANKS = (4, 8, 16)
LORA_DROPOUTS = (0.0, 0.1)
SCHEDULERS = ("Cosine", "OneCycle", "Plateau", "CosineWarm", "Step", "Poly")

# Parameter grid per scheduler family. OneCycle's div factors are integer
# grids; pct_start advances in steps of 0.005.
SCHEDULER_PARAM_GRIDS: dict[str, dict[str, tuple]] = {
    "Cosine": {},
    "OneCycle": {
        "pct_start": tuple(round(0.030 + 0.005 * i, 3) for i in range(15)),
        "div_factor": tuple(range(10, 101)),
        "final_div_factor": tuple(range(10, 1001)),
    },
    "Plateau": {"factor": (0.1, 0.5, 0.8), "patience": (0, 1, 2)},
    "CosineWarm": {"t0": (2, 3, 5), "t_mult": (1, 2)},
    "Step": {"step_size": (3, 5)},
    "Poly": {"power": (0.5, 0.9, 1.0)},
}


@dataclass(frozen=True)
class Configuration:
    """One point of the conditional space.

    ``lora_rank`` / ``lora_dropout`` are present exactly when ``lora_enabled``;
    ``scheduler_params`` always matches the ``scheduler`` family grid.
    """

    lora_enabled: bool
    weight_decay: float
    learning_rate: float
    aug_hflip: bool
    aug_vflip: bool
    aug_rotate: bool
    scheduler: str
    scheduler_params: dict = field(default_factory=dict)
    lora_rank: Optional[int] = None
    lora_dropout: Optional[float] = None


def validate(config: Configuration) -> list[str]:
    """Return the list of violated field names (empty when the config is valid)."""
    violations: list[str] = []
    if config.lora_enabled:
        if config.lora_rank not in LORA_RANKS:
            violations.append("lora_rank")
        if config.lora_dropout not in LORA_DROPOUTS:
            violations.append("lora_dropout")
    else:
        if config.lora_rank is not None:
            violations.append("lora_rank")
        if config.lora_dropout is not None:
            violations.append("lora_dropout")
    if config.weight_decay not in WEIGHT_DECAYS:
        violations.append("weight_decay")
    if config.learning_rate not in LEARNING_RATES:
        violations.append("learning_rate")
    for name in ("aug_hflip", "aug_vflip", "aug_rotate"):
        if not isinstance(getattr(config, name), bool):
            violations.append(name)
    if config.scheduler not in SCHEDULERS:
        violations.append("scheduler")
        return violations
    grid = SCHEDULER_PARAM_GRIDS[config.scheduler]
    params = config.scheduler_params
    if set(params) != set(grid) or any(params[k] not in grid[k] for k in grid):
        violations.append("scheduler_params")
    return violations


def enumerate_size(scheduler_grids: Mapping[str, Mapping[str, tuple]] | None = None) -> int:
    """Exact cardinality of the space by product-sum over the conditional structure.

    ``scheduler_grids`` substitutes the scheduler parameter grids (used by the
    brute-force cross-check on a truncated space).
    """
    grids = scheduler_grids if scheduler_grids is not None else SCHEDULER_PARAM_GRIDS
    lora_branch = 1 + len(LORA_RANKS) * len(LORA_DROPOUTS)
    scheduler_branch = sum(
        math.prod(len(values) for values in grid.values()) for grid in grids.values()
    )
    aug_branch = 2 * 2 * 2
    return lora_branch * len(WEIGHT_DECAYS) * len(LEARNING_RATES) * aug_branch * scheduler_branch


def _sample_one(rng: random.Random) -> Configuration:
    # Branch-first sampling: every scheduler family is equally likely no
    # matter how many leaf combinations it carries.
    lora_enabled = rng.random() < 0.5
    lora_rank = rng.choice(LORA_RANKS) if lora_enabled else None
    lora_dropout = rng.choice(LORA_DROPOUTS) if lora_enabled else None
    weight_decay = rng.choice(WEIGHT_DECAYS)
    learning_rate = rng.choice(LEARNING_RATES)
    aug_hflip = rng.random() < 0.5
    aug_vflip = rng.random() < 0.5
    aug_rotate = rng.random() < 0.5
    scheduler = rng.choice(SCHEDULERS)
    params = {name: rng.choice(grid) for name, grid in SCHEDULER_PARAM_GRIDS[scheduler].items()}
    return Configuration(
        lora_enabled=lora_enabled,
        weight_decay=weight_decay,
        learning_rate=learning_rate,
        aug_hflip=aug_hflip,
        aug_vflip=aug_vflip,
        aug_rotate=aug_rotate,
        scheduler=scheduler,
        scheduler_params=params,
        lora_rank=lora_rank,
        lora_dropout=lora_dropout,
    )


def sample(seed: int, n: int) -> list[Configuration]:
    """Draw ``n`` configurations uniformly over the conditional space.

    Deterministic for a fixed seed. Duplicates are resampled up to 10 times,
    then accepted.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    out: list[Configuration] = []
    seen: set[str] = set()
    for _ in range(n):
        config = _sample_one(rng)
        attempts = 0
        while config_id(config) in seen and attempts < 10:
            config = _sample_one(rng)
            attempts += 1
        seen.add(config_id(config))
        out.append(config)
    return out


_LOG_LR_LO = math.log10(LEARNING_RATES[0])
_LOG_LR_HI = math.log10(LEARNING_RATES[-1])
_NONZERO_WDS = tuple(w for w in WEIGHT_DECAYS if w > 0)
_LOG_WD_LO = math.log10(min(_NONZERO_WDS))
_LOG_WD_HI = math.log10(max(_NONZERO_WDS))

_ONECYCLE = SCHEDULER_PARAM_GRIDS["OneCycle"]

# Slot layout of the encoded vector; conditional slots are zero when inactive.
ENCODING_DIM = (
    1                       # lora_enabled
    + len(LORA_RANKS)       # rank one-hot
    + len(LORA_DROPOUTS)    # dropout one-hot
    + 2                     # weight decay: zero indicator + log10 scaled
    + 1                     # learning rate: log10 scaled
    + 3                     # augmentation flags
    + len(SCHEDULERS)       # scheduler one-hot
    + 3 + 3                 # plateau factor/patience one-hots
    + 3 + 2                 # cosine-warm t0/t_mult one-hots
    + 3                     # onecycle pct_start/div/final_div scaled
    + 2                     # step size one-hot
    + 3                     # poly power one-hot
)


def encode(config: Configuration) -> np.ndarray:
    """Encode a valid configuration as a fixed-length float vector.

    Categoricals are one-hot, learning rate and nonzero weight decay are
    log10 min-max scaled to [0, 1], OneCycle grids are min-max scaled, and
    inactive conditional slots are zero. Injective on the grid.
    """
    violations = validate(config)
    if violations:
        raise ValueError(f"invalid configuration: {violations}")
    v = np.zeros(ENCODING_DIM, dtype=np.float64)
    i = 0
    v[i] = 1.0 if config.lora_enabled else 0.0
    i += 1
    if config.lora_enabled:
        v[i + LORA_RANKS.index(config.lora_rank)] = 1.0
    i += len(LORA_RANKS)
    if config.lora_enabled:
        v[i + LORA_DROPOUTS.index(config.lora_dropout)] = 1.0
    i += len(LORA_DROPOUTS)
    if config.weight_decay == 0.0:
        v[i] = 1.0
    else:
        v[i + 1] = (math.log10(config.weight_decay) - _LOG_WD_LO) / (_LOG_WD_HI - _LOG_WD_LO)
    i += 2
    v[i] = (math.log10(config.learning_rate) - _LOG_LR_LO) / (_LOG_LR_HI - _LOG_LR_LO)
    i += 1
    v[i] = float(config.aug_hflip)
    v[i + 1] = float(config.aug_vflip)
    v[i + 2] = float(config.aug_rotate)
    i += 3
    v[i + SCHEDULERS.index(config.scheduler)] = 1.0
    i += len(SCHEDULERS)
    p = config.scheduler_params
    if config.scheduler == "Plateau":
        v[i + (0.1, 0.5, 0.8).index(p["factor"])] = 1.0
        v[i + 3 + (0, 1, 2).index(p["patience"])] = 1.0
    i += 6
    if config.scheduler == "CosineWarm":
        v[i + (2, 3, 5).index(p["t0"])] = 1.0
        v[i + 3 + (1, 2).index(p["t_mult"])] = 1.0
    i += 5
    if config.scheduler == "OneCycle":
        pct = _ONECYCLE["pct_start"]
        div = _ONECYCLE["div_factor"]
        fdiv = _ONECYCLE["final_div_factor"]
        v[i] = (p["pct_start"] - pct[0]) / (pct[-1] - pct[0])
        v[i + 1] = (p["div_factor"] - div[0]) / (div[-1] - div[0])
        v[i + 2] = (p["final_div_factor"] - fdiv[0]) / (fdiv[-1] - fdiv[0])
    i += 3
    if config.scheduler == "Step":
        v[i + (3, 5).index(p["step_size"])] = 1.0
    i += 2
    if config.scheduler == "Poly":
        v[i + (0.5, 0.9, 1.0).index(p["power"])] = 1.0
    i += 3
    assert i == ENCODING_DIM
    return v


def encode_batch(configs: list[Configuration]) -> np.ndarray:
    """Stack encodings into an (n, ENCODING_DIM) matrix."""
    return np.stack([encode(c) for c in configs]) if configs else np.zeros((0, ENCODING_DIM))


def to_json_dict(config: Configuration) -> dict[str, Any]:
    """Canonical JSON object form; absent conditionals are omitted, not null."""
    d: dict[str, Any] = {"lora_enabled": config.lora_enabled}
    if config.lora_enabled:
        d["lora_rank"] = config.lora_rank
        d["lora_dropout"] = config.lora_dropout
    d["weight_decay"] = config.weight_decay
    d["learning_rate"] = config.learning_rate
    d["aug_hflip"] = config.aug_hflip
    d["aug_vflip"] = config.aug_vflip
    d["aug_rotate"] = config.aug_rotate
    d["scheduler"] = config.scheduler
    d["scheduler_params"] = dict(config.scheduler_params)
    return d


def from_json_dict(d: Mapping[str, Any]) -> Configuration:
    """Inverse of :func:`to_json_dict`; does not validate beyond field presence."""
    return Configuration(
        lora_enabled=bool(d["lora_enabled"]),
        weight_decay=d["weight_decay"],
        learning_rate=d["learning_rate"],
        aug_hflip=bool(d["aug_hflip"]),
        aug_vflip=bool(d["aug_vflip"]),
        aug_rotate=bool(d["aug_rotate"]),
        scheduler=d["scheduler"],
        scheduler_params=dict(d.get("scheduler_params", {})),
        lora_rank=d.get("lora_rank"),
        lora_dropout=d.get("lora_dropout"),
    )


def canonical_json(config: Configuration) -> str:
    """Key-sorted compact JSON, the hashing and dedup basis."""
    return json.dumps(to_json_dict(config), sort_keys=True, separators=(",", ":"))


def config_id(config: Configuration) -> str:
    """First 16 hex chars of the SHA-256 of the canonical config JSON."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:16]
