"""The configuration payload of the wire protocol.

Mirrors the tuner's canonical config JSON: conditional LoRA fields, fixed
optimizer (AdamW) and loss (BCE + Dice), and per-scheduler parameter grids.
The worker validates strictly against the grids before building a trainer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

LEARNING_RATES = (
    1e-5, 1.2e-5, 1.5e-5, 2e-5, 2.5e-5, 3.5e-5, 5e-5, 6e-5, 6.5e-5,
    0.0001, 0.00012, 0.00018, 0.00025, 0.00032, 0.0004, 0.00048, 0.0005,
    0.00055, 0.0008, 0.001, 0.0015, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007,
)
WEIGHT_DECAYS = (0.0, 1e-5, 5e-5, 1e-4)
LORA_RANKS = (4, 8, 16)
LORA_DROPOUTS = (0.0, 0.1)

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

MAX_EPOCHS = 10


@dataclass(frozen=True)
class WorkerConfig:
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


def validate_payload(d: Mapping[str, Any]) -> list[str]:
    """Violated field names in a raw config JSON object (empty means valid)."""
    violations: list[str] = []
    required = ("lora_enabled", "weight_decay", "learning_rate", "aug_hflip",
                "aug_vflip", "aug_rotate", "scheduler")
    for name in required:
        if name not in d:
            violations.append(name)
    if violations:
        return violations
    if d["lora_enabled"]:
        if d.get("lora_rank") not in LORA_RANKS:
            violations.append("lora_rank")
        if d.get("lora_dropout") not in LORA_DROPOUTS:
            violations.append("lora_dropout")
    elif "lora_rank" in d or "lora_dropout" in d:
        violations.append("lora_rank")
    if d["weight_decay"] not in WEIGHT_DECAYS:
        violations.append("weight_decay")
    if d["learning_rate"] not in LEARNING_RATES:
        violations.append("learning_rate")
    scheduler = d["scheduler"]
    if scheduler not in SCHEDULER_PARAM_GRIDS:
        violations.append("scheduler")
        return violations
    grid = SCHEDULER_PARAM_GRIDS[scheduler]
    params = d.get("scheduler_params", {})
    if set(params) != set(grid) or any(params[k] not in grid[k] for k in grid):
        violations.append("scheduler_params")
    return violations


def parse_config(d: Mapping[str, Any]) -> WorkerConfig:
    """Validate and build a WorkerConfig; raises ValueError naming bad fields."""
    violations = validate_payload(d)
    if violations:
        raise ValueError(f"invalid config: {violations}")
    return WorkerConfig(
        lora_enabled=bool(d["lora_enabled"]),
        weight_decay=float(d["weight_decay"]),
        learning_rate=float(d["learning_rate"]),
        aug_hflip=bool(d["aug_hflip"]),
        aug_vflip=bool(d["aug_vflip"]),
        aug_rotate=bool(d["aug_rotate"]),
        scheduler=str(d["scheduler"]),
        scheduler_params=dict(d.get("scheduler_params", {})),
        lora_rank=d.get("lora_rank"),
        lora_dropout=d.get("lora_dropout"),
    )
