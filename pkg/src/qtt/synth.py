"""Deterministic surrogate of fine-tuning: exponential-saturation learning
curves whose parameters are smooth hash-seeded functions of the config
encoding, plus an exhaustive oracle and a mock worker speaking the tuner's
wire protocol on a simulated clock.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import space
from .curves import CurveStore, make_record
from .meta_features import MetaFeatures
from .space import Configuration

NOISE_STD = 0.005
_N_SINE = 8


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


class SurrogateTask:
    """val_iou(epoch) = a - (a - b) * exp(-r * epoch) + noise, with (a, b, r)
    smooth random-feature functions of the config vector; cost is constant
    across epochs. Fully deterministic given the task seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 101]))
        dim = space.ENCODING_DIM
        # scales keep the tanh/sigmoid squashes in their graded region, so
        # pool values spread out instead of piling onto a saturated asymptote
        self._w_lin = rng.normal(0.0, 0.18, size=(3, dim))
        self._omega = rng.normal(0.0, 1.0, size=(3, _N_SINE, dim))
        self._phase = rng.uniform(0.0, 2.0 * math.pi, size=(3, _N_SINE))
        self._amp = rng.normal(0.0, 0.2, size=(3, _N_SINE))

    @property
    def dataset_id(self) -> str:
        return f"synth-{self.seed}"

    def _raw(self, vec: np.ndarray, which: int) -> float:
        lin = float(self._w_lin[which] @ (vec - 0.5))
        sines = np.sin(self._omega[which] @ vec + self._phase[which])
        return lin + float(self._amp[which] @ sines)

    def curve_params(self, vec: np.ndarray) -> tuple[float, float, float]:
        """(asymptote a, start b, rate r) for one config vector; b < a."""
        a = 0.5 + 0.45 * math.tanh(self._raw(vec, 0))
        b = a * (0.1 + 0.7 * _sigmoid(self._raw(vec, 1)))
        r = 0.2 + 1.3 * _sigmoid(self._raw(vec, 2))
        return a, b, r

    def noiseless(self, config: Configuration, epoch: int) -> float:
        a, b, r = self.curve_params(space.encode(config))
        return a - (a - b) * math.exp(-r * epoch)

    def cost(self, config: Configuration) -> float:
        rank = config.lora_rank if config.lora_enabled else 0
        n_augs = int(config.aug_hflip) + int(config.aug_vflip) + int(config.aug_rotate)
        return 1.0 + 0.3 * rank / 16.0 + 0.2 * n_augs

    def simulate_step(self, config: Configuration, epoch: int) -> tuple[float, float]:
        """(val_iou, cost_s) for training this config's epoch; noise is seeded
        per (task, config, epoch) so replays are identical."""
        if not 1 <= epoch <= 10:
            raise ValueError(f"epoch {epoch} outside [1, 10]")
        cid = space.config_id(config)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, int(cid, 16), epoch]))
        noise = rng.normal(0.0, NOISE_STD)
        value = float(np.clip(self.noiseless(config, epoch) + noise, 0.0, 1.0))
        return value, self.cost(config)

    def zero_shot(self) -> float:
        """Pre-fine-tuning baseline: the curve start of the neutral (zero) vector."""
        a = 0.5 + 0.45 * math.tanh(self._raw(np.zeros(space.ENCODING_DIM), 0))
        b = a * (0.1 + 0.7 * _sigmoid(self._raw(np.zeros(space.ENCODING_DIM), 1)))
        return float(np.clip(b, 0.0, 1.0))

    def meta_features(self) -> MetaFeatures:
        """Synthetic dataset descriptor derived from the task seed."""
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 777]))
        return MetaFeatures(
            n_images=int(rng.integers(60, 400)),
            n_classes=int(rng.choice([2, 2, 2, 2, 3, 4, 5])),
            mean_height=float(rng.uniform(64, 512)),
            mean_width=float(rng.uniform(64, 512)),
            mean_foreground_fraction=float(rng.uniform(0.02, 0.5)),
            mean_instances_per_image=float(rng.uniform(1.0, 8.0)),
            channel_count=int(rng.choice([1, 3])),
        )


def generate_meta_dataset(n_tasks: int, pairs_per_task: int, seed: int,
                          ) -> tuple[CurveStore, dict[str, MetaFeatures]]:
    """Full 10-epoch curves for sampled configs on ``n_tasks`` surrogate
    datasets; returns the store plus per-dataset meta-features."""
    if n_tasks < 1 or pairs_per_task < 1:
        raise ValueError("counts must be positive")
    task_seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_tasks)
    store = CurveStore()
    features: dict[str, MetaFeatures] = {}
    for task_seed in task_seeds:
        task = SurrogateTask(int(task_seed))
        features[task.dataset_id] = task.meta_features()
        for config in space.sample(task.seed, pairs_per_task):
            for epoch in range(1, 11):
                val, cost = task.simulate_step(config, epoch)
                store.append(make_record(task.dataset_id, config, epoch, val, cost, seed=0))
    return store, features


def oracle_best(task: SurrogateTask, pool: Sequence[Configuration],
                ) -> tuple[str, float, float]:
    """Exhaustive noiseless sweep of the pool over epochs 1..10.

    Returns (best config_id, best noiseless val_iou, total cost of the sweep).
    """
    if not pool:
        raise ValueError("empty pool")
    best_id, best_val = None, -1.0
    total_cost = 0.0
    for config in pool:
        cid = space.config_id(config)
        total_cost += 10.0 * task.cost(config)
        for epoch in range(1, 11):
            value = task.noiseless(config, epoch)
            if value > best_val or (value == best_val and cid < best_id):
                best_id, best_val = cid, value
    return best_id, best_val, total_cost


def oracle_pool_values(task: SurrogateTask, pool: Sequence[Configuration]) -> np.ndarray:
    """Best noiseless value per pool config (the epoch-10 curve point)."""
    return np.array([max(task.noiseless(c, e) for e in range(1, 11)) for c in pool])


def regret(incumbent_val_iou: float | None, oracle_value: float) -> float:
    """Oracle minus incumbent, floored at 0; an empty run regrets the oracle value."""
    if incumbent_val_iou is None:
        return max(oracle_value, 0.0)
    return max(oracle_value - incumbent_val_iou, 0.0)


class MockWorker:
    """In-process worker implementing the wire protocol over dict messages.

    Costs are declared (simulated clock); per-run epochs must arrive in order,
    mirroring the real trainer's contract.
    """

    ZERO_SHOT_COST_S = 0.5

    def __init__(self):
        self._task: SurrogateTask | None = None
        self._next_epoch: dict[str, int] = {}

    def request(self, req: dict) -> dict:
        try:
            return self._dispatch(req)
        except Exception as exc:  # protocol errors never kill the worker
            return {"status": "error", "message": str(exc)}

    def _dispatch(self, req: dict) -> dict:
        cmd = req.get("cmd")
        if cmd == "init":
            path = str(req.get("dataset_path", ""))
            if not path.startswith("synth:"):
                return {"status": "error", "message": f"mock worker needs synth:<seed> dataset, got {path!r}"}
            self._task = SurrogateTask(int(path.split(":", 1)[1]))
            self._next_epoch.clear()
            return {"status": "ok"}
        if cmd == "shutdown":
            return {"status": "ok"}
        if self._task is None:
            return {"status": "error", "message": "init required before other commands"}
        if cmd == "zero_shot":
            return {"status": "ok", "val_iou": self._task.zero_shot(),
                    "wall_clock_s": self.ZERO_SHOT_COST_S}
        if cmd == "step":
            config = space.from_json_dict(req["config"])
            violations = space.validate(config)
            if violations:
                return {"status": "error", "message": f"invalid config: {violations}"}
            epoch = int(req["epoch"])
            run_id = str(req.get("run_id", ""))
            expected = self._next_epoch.get(run_id, 1)
            if epoch != expected:
                return {"status": "error",
                        "message": f"epoch order: got {epoch}, expected {expected}"}
            val, cost = self._task.simulate_step(config, epoch)
            self._next_epoch[run_id] = epoch + 1
            return {"status": "ok", "val_iou": val, "wall_clock_s": cost}
        return {"status": "error", "message": f"unknown cmd {cmd!r}"}

    def close(self) -> None:
        pass


def run_stdio_worker(stdin=None, stdout=None) -> int:
    """Drive a MockWorker over newline-delimited JSON on stdio; exits on
    shutdown or EOF. Lets the subprocess client path be exercised end to end."""
    import json as _json
    import sys

    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    worker = MockWorker()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        req = None
        try:
            req = _json.loads(line)
        except _json.JSONDecodeError as exc:
            resp = {"status": "error", "message": f"malformed request: {exc}"}
        else:
            resp = worker.request(req)
        stdout.write(_json.dumps(resp, sort_keys=True) + "\n")
        stdout.flush()
        if isinstance(req, dict) and req.get("cmd") == "shutdown":
            break
    return 0
