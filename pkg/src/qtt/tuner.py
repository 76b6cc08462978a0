"""Budget-constrained tuning loop and meta-training driver.

One run: load a meta-trained checkpoint (which must not contain the target
dataset's curves), sample a candidate pool, then repeatedly pick the action
with the best EI-per-cost, dispatch one training epoch to the worker, and
fold the observation back into the GP — stopping when the predicted cost of
the next step would overrun the remaining budget.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import acquisition, meta_features, predictors, space, synth
from .acquisition import CandidateAction
from .curves import CurveStore
from .meta_features import MetaFeatures, MetaStats
from .predictors import CostPredictor, PerfPredictor
from .space import Configuration

MAX_EPOCHS = 10
BUDGET_SAFETY = 0.9  # skip a step whose predicted cost exceeds this share of the remainder


class LodoViolation(RuntimeError):
    """Checkpoint metadata contains the tuning target's dataset id."""


@dataclass
class TuneRequest:
    dataset: str                       # "synth:<seed>" or a directory path
    budget_s: float
    checkpoint: str
    pool_size: int = 128
    seed: int = 0
    worker: str = "mock"               # "mock" or a shell command speaking the protocol
    subsample_n: int = 100
    clock: Optional[str] = None        # "simulated" | "wall"; default by worker kind

    def __post_init__(self):
        if self.budget_s <= 0:
            raise ValueError("budget_s must be positive")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")
        if self.clock is None:
            self.clock = "simulated" if self.worker == "mock" else "wall"


@dataclass
class TraceStep:
    config_id: str
    epoch: int
    val_iou: float
    cost_s: float
    clock_s: float  # elapsed budget clock when the step was dispatched

    def to_json_dict(self) -> dict:
        return {"config_id": self.config_id, "epoch": self.epoch, "val_iou": self.val_iou,
                "cost_s": self.cost_s, "clock_s": self.clock_s}


@dataclass
class TuneResult:
    dataset: str
    seed: int
    budget_s: float
    pool_size: int
    incumbent: Optional[dict]          # {config_id, config, val_iou, epoch}
    trace: list[TraceStep]
    ledger: dict                       # selection_overhead_s / worker_time_s / idle_s / total_s
    stop_reason: str
    quarantined: list[str] = field(default_factory=list)

    @property
    def incumbent_val_iou(self) -> Optional[float]:
        return None if self.incumbent is None else self.incumbent["val_iou"]

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "seed": self.seed,
            "budget_s": self.budget_s,
            "pool_size": self.pool_size,
            "incumbent": self.incumbent,
            "trace": [t.to_json_dict() for t in self.trace],
            "ledger": self.ledger,
            "stop_reason": self.stop_reason,
            "quarantined": self.quarantined,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())


# -- workers -------------------------------------------------------------------

class SubprocessWorker:
    """JSONL client over a worker process's stdin/stdout."""

    def __init__(self, command: str):
        self._proc = subprocess.Popen(
            shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1)

    def request(self, req: dict) -> dict:
        try:
            self._proc.stdin.write(json.dumps(req) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            return {"status": "error", "message": f"worker pipe failure: {exc}"}
        if not line:
            return {"status": "error", "message": "worker closed its output"}
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            return {"status": "error", "message": f"malformed worker response: {exc}"}

    def close(self) -> None:
        try:
            if self._proc.poll() is None:
                self.request({"cmd": "shutdown"})
                self._proc.wait(timeout=10)
        except Exception:
            self._proc.kill()


def make_worker(spec: str):
    return synth.MockWorker() if spec == "mock" else SubprocessWorker(spec)


# -- clocks ---------------------------------------------------------------------

class SimulatedClock:
    def __init__(self):
        self.now = 0.0

    def advance(self, dt: float) -> None:
        self.now += dt


class WallClock:
    def __init__(self):
        self._start = time.perf_counter()

    @property
    def now(self) -> float:
        return time.perf_counter() - self._start


# -- meta features for the target ------------------------------------------------

def dataset_ref_to_id(dataset: str) -> str:
    if dataset.startswith("synth:"):
        return f"synth-{int(dataset.split(':', 1)[1])}"
    return Path(dataset).name


def load_image_mask_dir(path: str | Path, subsample_n: Optional[int] = None,
                        seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Read the ``images/*.png`` + ``masks/*.png`` filename-matched layout."""
    from PIL import Image

    root = Path(path)
    image_dir, mask_dir = root / "images", root / "masks"
    names = sorted(p.name for p in image_dir.glob("*.png"))
    if not names:
        raise FileNotFoundError(f"no images under {image_dir}")
    if subsample_n is not None and subsample_n < len(names):
        rng = np.random.default_rng(seed)
        names = [names[i] for i in sorted(rng.choice(len(names), subsample_n, replace=False))]
    pairs = []
    for name in names:
        image = np.asarray(Image.open(image_dir / name))
        mask = np.asarray(Image.open(mask_dir / name))
        pairs.append((image, mask))
    return pairs


def target_meta_features(req: TuneRequest) -> MetaFeatures:
    if req.dataset.startswith("synth:"):
        return synth.SurrogateTask(int(req.dataset.split(":", 1)[1])).meta_features()
    return meta_features.extract(load_image_mask_dir(req.dataset, req.subsample_n, req.seed))


# -- the loop ---------------------------------------------------------------------

def tune(req: TuneRequest) -> TuneResult:
    """One budgeted tuning run. Raises LodoViolation if the checkpoint was
    meta-trained with the target dataset's curves."""
    perf, cost, stats, meta = predictors.load_checkpoint(req.checkpoint)
    target_id = dataset_ref_to_id(req.dataset)
    if target_id in meta["dataset_ids"]:
        raise LodoViolation(
            f"checkpoint {req.checkpoint} was meta-trained on target {target_id!r}; "
            f"re-run meta-training with --exclude {target_id}")

    meta_vec = meta_features.normalize(target_meta_features(req), stats)
    pool = space.sample(req.seed, req.pool_size)
    config_ids = [space.config_id(c) for c in pool]
    config_vecs = space.encode_batch(pool)

    simulated = req.clock == "simulated"
    clock = SimulatedClock() if simulated else WallClock()
    worker = make_worker(req.worker)
    # one run_id per configuration: the worker keeps that model's training
    # state between its epoch steps
    run_prefix = f"run-{target_id}-s{req.seed}"

    histories: dict[str, list[float]] = {cid: [] for cid in config_ids}
    quarantined: set[str] = set()
    trace: list[TraceStep] = []
    incumbent: Optional[dict] = None
    selection_s = 0.0
    worker_s = 0.0
    stop_reason = "budget"
    gp_stale = False

    try:
        resp = worker.request({"cmd": "init", "dataset_path": req.dataset,
                               "subsample_n": req.subsample_n, "seed": req.seed})
        if resp.get("status") != "ok":
            raise RuntimeError(f"worker init failed: {resp.get('message')}")

        obs_x: list[np.ndarray] = []
        obs_y: list[float] = []
        while True:
            t_sel = time.perf_counter()
            order = [i for i, cid in enumerate(config_ids)
                     if cid not in quarantined and len(histories[cid]) < MAX_EPOCHS]
            if not order:
                stop_reason = "pool_exhausted"
                break
            if gp_stale:
                xs = np.vstack(([perf.reservoir_x] if perf.reservoir_x is not None else [])
                               + [x[None, :] for x in obs_x])
                ys = np.concatenate(([perf.reservoir_y] if perf.reservoir_y is not None else [])
                                    + [np.array(obs_y)])
                perf.condition(xs, ys)
                gp_stale = False
            candidates = [
                CandidateAction(config_ids[i], pool[i], len(histories[config_ids[i]]) + 1,
                                tuple(histories[config_ids[i]]))
                for i in order
            ]
            action = acquisition.select_next(
                perf, cost, candidates, meta_vec,
                incumbent=None if incumbent is None else incumbent["val_iou"],
                config_vecs=config_vecs[order])
            x_next = predictors.assemble_input(
                config_vecs[config_ids.index(action.config_id)], meta_vec,
                action.next_epoch, action.history)
            predicted_cost = float(predictors.predict_cost(cost, x_next)[0])
            if not simulated:
                selection_s += time.perf_counter() - t_sel

            remaining = req.budget_s - clock.now
            if predicted_cost > BUDGET_SAFETY * remaining:
                stop_reason = "budget"
                break

            dispatched_at = clock.now
            t_step = time.perf_counter()
            resp = worker.request({"cmd": "step", "config": space.to_json_dict(action.config),
                                   "epoch": action.next_epoch,
                                   "run_id": f"{run_prefix}-{action.config_id}"})
            step_wall = time.perf_counter() - t_step
            if resp.get("status") != "ok":
                quarantined.add(action.config_id)
                if not simulated:
                    worker_s += step_wall
                continue

            val_iou = float(resp["val_iou"])
            step_cost = float(resp["wall_clock_s"])
            if simulated:
                clock.advance(step_cost)
                worker_s += step_cost
            else:
                worker_s += step_wall
            trace.append(TraceStep(action.config_id, action.next_epoch, val_iou,
                                   step_cost, dispatched_at))
            histories[action.config_id].append(val_iou)
            obs_x.append(x_next)
            obs_y.append(val_iou)
            gp_stale = True
            if incumbent is None or val_iou > incumbent["val_iou"]:
                incumbent = {"config_id": action.config_id,
                             "config": space.to_json_dict(action.config),
                             "val_iou": val_iou, "epoch": action.next_epoch}
    finally:
        worker.close()

    total = clock.now
    idle = 0.0 if simulated else max(total - selection_s - worker_s, 0.0)
    ledger = {"selection_overhead_s": 0.0 if simulated else selection_s,
              "worker_time_s": worker_s, "idle_s": idle, "total_s": total}
    return TuneResult(dataset=req.dataset, seed=req.seed, budget_s=req.budget_s,
                      pool_size=req.pool_size, incumbent=incumbent, trace=trace,
                      ledger=ledger, stop_reason=stop_reason,
                      quarantined=sorted(quarantined))


# -- meta-training ----------------------------------------------------------------

def meta_train(store: CurveStore, features: Mapping[str, MetaFeatures], out_path: str | Path,
               steps: int = 300, lr: float = 1e-2, seed: int = 0) -> dict:
    """Fit both predictors on the full store and write one checkpoint.

    Byte-identical outputs for identical (store, steps, lr, seed).
    """
    if len(store) == 0:
        raise ValueError("empty curve store")
    dataset_ids = store.dataset_ids()
    stats = meta_features.fit_stats([features[ds] for ds in dataset_ids])
    perf = predictors.fit_perf(store, features, stats, steps=steps, lr=lr, seed=seed)
    cost = predictors.fit_cost(store, features, stats, steps=steps, lr=lr, seed=seed + 1)
    metrics = {"perf_val_nll_per_point": perf.fit_info["val_nll_per_point"],
               "cost_val_mse": cost.fit_info["val_mse"]}
    predictors.save_checkpoint(out_path, perf, cost, stats, dataset_ids, metrics)
    return metrics


# -- benchmarking -----------------------------------------------------------------

def run_benchmark(datasets: Sequence[str], budgets: Sequence[float], seeds: Sequence[int],
                  tune_fn: Callable[[str, float, int], Optional[float]],
                  zero_shot: Mapping[str, float]) -> list[dict]:
    """Mean/std of incumbent val_iou per (dataset, budget) over seeds.

    ``tune_fn(dataset, budget, seed)`` returns the run's incumbent val_iou
    (None counts as 0); a raised error marks that cell failed and the sweep
    continues. Rows come back sorted by gain over zero-shot at the first
    budget, descending.
    """
    rows = []
    for dataset in datasets:
        cells: dict[float, Optional[tuple[float, float]]] = {}
        for budget in budgets:
            values = []
            failed = False
            for seed in seeds:
                try:
                    value = tune_fn(dataset, budget, seed)
                except Exception:
                    failed = True
                    break
                values.append(0.0 if value is None else value)
            if failed:
                cells[budget] = None
            else:
                std = 0.0 if max(values) == min(values) else float(np.std(values))
                cells[budget] = (float(np.mean(values)), std)
        rows.append({"dataset": dataset, "zero_shot": float(zero_shot[dataset]),
                     "cells": cells})
    first = budgets[0]
    rows.sort(key=lambda r: (-(r["cells"][first][0] - r["zero_shot"])
                             if r["cells"][first] is not None else math.inf,
                             r["dataset"]))
    return rows


def render_markdown(rows: Sequence[dict], budgets: Sequence[float]) -> str:
    """Markdown table with mean_{std} cells, one column per budget."""
    header = "| dataset | zero-shot | " + " | ".join(f"{int(b)}s" for b in budgets) + " |"
    rule = "|---" * (2 + len(budgets)) + "|"
    lines = [header, rule]
    for row in rows:
        cells = []
        for budget in budgets:
            cell = row["cells"][budget]
            cells.append("failed" if cell is None else f"{cell[0]:.3f}_{{{cell[1]:.3f}}}")
        lines.append(f"| {row['dataset']} | {row['zero_shot']:.3f} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
