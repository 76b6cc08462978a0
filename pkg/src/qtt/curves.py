"""Append-only learning-curve store (the meta-dataset) with leave-one-dataset-out splits.

On disk: JSON Lines, one record per line, fields exactly
``dataset_id, config_id, config, epoch, val_iou, epoch_cost_s, seed``.
Within one (dataset_id, config_id, seed) curve, epochs are unique and
contiguous from 1; meta-training curves stop at epoch 10.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from . import space
from .space import Configuration

MAX_EPOCHS = 10


@dataclass(frozen=True)
class CurveRecord:
    dataset_id: str
    config_id: str
    config: Configuration
    epoch: int
    val_iou: float
    epoch_cost_s: float
    seed: int

    def check(self) -> None:
        if not 1 <= self.epoch <= MAX_EPOCHS:
            raise ValueError(f"epoch {self.epoch} outside [1, {MAX_EPOCHS}]")
        if not 0.0 <= self.val_iou <= 1.0:
            raise ValueError(f"val_iou {self.val_iou} outside [0, 1]")
        if not self.epoch_cost_s > 0:
            raise ValueError(f"epoch_cost_s {self.epoch_cost_s} must be > 0")

    def key(self) -> tuple[str, str, int]:
        return (self.dataset_id, self.config_id, self.seed)

    def to_json_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "config_id": self.config_id,
            "config": space.to_json_dict(self.config),
            "epoch": self.epoch,
            "val_iou": self.val_iou,
            "epoch_cost_s": self.epoch_cost_s,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CurveRecord":
        return cls(
            dataset_id=d["dataset_id"],
            config_id=d["config_id"],
            config=space.from_json_dict(d["config"]),
            epoch=int(d["epoch"]),
            val_iou=float(d["val_iou"]),
            epoch_cost_s=float(d["epoch_cost_s"]),
            seed=int(d["seed"]),
        )


def make_record(dataset_id: str, config: Configuration, epoch: int, val_iou: float,
                epoch_cost_s: float, seed: int = 0) -> CurveRecord:
    """Build a record with the config_id derived from the canonical config JSON."""
    return CurveRecord(dataset_id, space.config_id(config), config, epoch,
                       val_iou, epoch_cost_s, seed)


@dataclass
class CurveStore:
    """Ordered record collection indexed by (dataset_id, config_id, seed).

    Single writer, many readers; readers work on the snapshot they loaded.
    """

    records: list[CurveRecord] = field(default_factory=list)
    _max_epoch: dict[tuple[str, str, int], int] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CurveRecord]:
        return iter(self.records)

    def __eq__(self, other) -> bool:
        return isinstance(other, CurveStore) and self.records == other.records

    def append(self, record: CurveRecord) -> "CurveStore":
        """Append one record; epochs per curve must arrive contiguously from 1."""
        record.check()
        key = record.key()
        expected = self._max_epoch.get(key, 0) + 1
        if record.epoch != expected:
            raise ValueError(
                f"epoch gap for {key}: got epoch {record.epoch}, expected {expected}"
            )
        self.records.append(record)
        self._max_epoch[key] = record.epoch
        return self

    def extend(self, records) -> "CurveStore":
        for r in records:
            self.append(r)
        return self

    def dataset_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.dataset_id, None)
        return list(seen)

    def curve(self, dataset_id: str, config_id: str, seed: int) -> list[CurveRecord]:
        """The records of one curve, in epoch order."""
        return sorted(
            (r for r in self.records if r.key() == (dataset_id, config_id, seed)),
            key=lambda r: r.epoch,
        )

    def lodo_split(self, target: str) -> tuple["CurveStore", "CurveStore"]:
        """Partition into (train without target dataset, held target records)."""
        train, held = CurveStore(), CurveStore()
        for r in self.records:
            (held if r.dataset_id == target else train).append(r)
        return train, held

    def best_observed(self, dataset_id: str, seed: int) -> Optional[tuple[str, int, float]]:
        """Highest val_iou for that dataset+seed; ties prefer the cheaper curve
        (cumulative cost up to the epoch), then the lexicographically smaller
        config_id. Returns (config_id, epoch, val_iou) or None."""
        cum_cost: dict[tuple[str, str, int], float] = {}
        best = None
        best_rank = None
        for r in self.records:
            key = r.key()
            cum_cost[key] = cum_cost.get(key, 0.0) + r.epoch_cost_s
            if r.dataset_id != dataset_id or r.seed != seed:
                continue
            rank = (-r.val_iou, cum_cost[key], r.config_id)
            if best_rank is None or rank < best_rank:
                best_rank = rank
                best = (r.config_id, r.epoch, r.val_iou)
        return best

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_json_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CurveStore":
        """Read a JSONL store; errors report the offending 1-based line number."""
        store = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = CurveRecord.from_json_dict(json.loads(line))
                    store.append(record)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
        return store
