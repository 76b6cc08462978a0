"""Per-run training state behind the protocol: build a trainer from a config
payload, advance it one epoch per step request, evaluate val mIoU with
jittered box prompts."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from . import models
from .config import MAX_EPOCHS, WorkerConfig, parse_config
from .data import load_dataset, train_val_split
from .metrics import compute_miou
from .prompts import build_prompts, rasterize_boxes

BATCH_SIZE = 4


def combined_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """BCE + Dice with equal weights."""
    bce = F.binary_cross_entropy_with_logits(logits, target)
    prob = torch.sigmoid(logits)
    eps = 1.0
    dice = 1.0 - (2.0 * (prob * target).sum() + eps) / (prob.sum() + target.sum() + eps)
    return bce + dice


def _augment(image: np.ndarray, mask: np.ndarray, config: WorkerConfig,
             rng: np.random.Generator):
    if config.aug_hflip and rng.random() < 0.5:
        image, mask = image[:, ::-1], mask[:, ::-1]
    if config.aug_vflip and rng.random() < 0.5:
        image, mask = image[::-1, :], mask[::-1, :]
    if config.aug_rotate:
        k = int(rng.integers(0, 4))
        image, mask = np.rot90(image, k), np.rot90(mask, k)
    return np.ascontiguousarray(image), np.ascontiguousarray(mask)


def build_scheduler(optimizer, config: WorkerConfig, steps_per_epoch: int):
    """Instantiate the configured scheduler; returns (scheduler, cadence)
    with cadence one of 'batch', 'epoch', 'plateau'."""
    p = config.scheduler_params
    sched = torch.optim.lr_scheduler
    if config.scheduler == "Cosine":
        return sched.CosineAnnealingLR(optimizer, T_max=MAX_EPOCHS), "epoch"
    if config.scheduler == "OneCycle":
        return sched.OneCycleLR(
            optimizer, max_lr=config.learning_rate,
            total_steps=MAX_EPOCHS * steps_per_epoch, pct_start=p["pct_start"],
            div_factor=p["div_factor"], final_div_factor=p["final_div_factor"]), "batch"
    if config.scheduler == "Plateau":
        return sched.ReduceLROnPlateau(optimizer, mode="max", factor=p["factor"],
                                       patience=p["patience"]), "plateau"
    if config.scheduler == "CosineWarm":
        return sched.CosineAnnealingWarmRestarts(optimizer, T_0=p["t0"],
                                                 T_mult=p["t_mult"]), "epoch"
    if config.scheduler == "Step":
        return sched.StepLR(optimizer, step_size=p["step_size"]), "epoch"
    if config.scheduler == "Poly":
        return sched.PolynomialLR(optimizer, total_iters=MAX_EPOCHS,
                                  power=p["power"]), "epoch"
    raise ValueError(f"unsupported scheduler {config.scheduler!r}")


def build_assembly(config: WorkerConfig, seed: int, steps_per_epoch: int,
                   backbone: str = "toy"):
    """Model + optimizer + scheduler per the config: optional LoRA on the
    encoder (frozen base), AdamW, BCE+Dice loss, augmentations by flags."""
    if backbone != "toy":
        from .sam_backbone import build_sam_assembly
        return build_sam_assembly(config, seed)
    model = models.ToyBackbone(seed)
    if config.lora_enabled:
        models.apply_lora_toy(model, config.lora_rank, config.lora_dropout)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=config.learning_rate,
                                  weight_decay=config.weight_decay)
    scheduler, cadence = build_scheduler(optimizer, config, steps_per_epoch)
    return model, optimizer, scheduler, cadence


@dataclass
class RunState:
    config: WorkerConfig
    model: torch.nn.Module
    optimizer: torch.optim.Optimizer
    scheduler: object
    cadence: str
    next_epoch: int = 1


class Engine:
    """One worker process: a dataset (set by init) plus per-run_id trainers."""

    def __init__(self, backbone: str = "toy", deterministic: bool = False,
                 sam_checkpoint: str | None = None):
        self.backbone = backbone
        self.deterministic = deterministic
        self.sam_checkpoint = sam_checkpoint
        if deterministic:
            torch.set_num_threads(1)
        self.train_pairs = None
        self.val_pairs = None
        self.n_classes = 2
        self.seed = 0
        self.runs: dict[str, RunState] = {}

    # -- lifecycle --------------------------------------------------------

    def init(self, dataset_path: str, subsample_n: int | None, seed: int) -> None:
        pairs = load_dataset(dataset_path, subsample_n, seed)
        self.seed = int(seed)
        self.train_pairs, self.val_pairs = train_val_split(pairs, seed)
        max_label = max(int(mask.max()) for _, mask in pairs)
        self.n_classes = max(2, max_label + 1)
        self.runs.clear()

    def _require_init(self):
        if self.train_pairs is None:
            raise RuntimeError("init required before other commands")

    # -- forward helpers ---------------------------------------------------

    def _forward_class(self, model, image: np.ndarray, prompt: np.ndarray) -> torch.Tensor:
        x = np.concatenate([image.transpose(2, 0, 1), prompt[None]], axis=0)
        return model(torch.from_numpy(x).float()[None])[0]

    def _predict_mask(self, model, image: np.ndarray, gt_mask: np.ndarray,
                      jitter_seed: int) -> np.ndarray:
        """Prompt-conditioned prediction: one forward per class box set,
        merged by per-pixel max confidence."""
        boxes = build_prompts(gt_mask, jitter_seed)
        present = sorted({cls for cls, _ in boxes})
        if not present:
            return np.zeros_like(gt_mask)
        probs = np.zeros((self.n_classes,) + gt_mask.shape, dtype=np.float32)
        with torch.no_grad():
            for cls in present:
                prompt = rasterize_boxes(boxes, gt_mask.shape, class_id=cls)
                logits = self._forward_class(model, image, prompt)
                probs[cls] = torch.sigmoid(logits).numpy()
        best = probs.max(axis=0)
        label = probs.argmax(axis=0)
        return np.where(best > 0.5, label, 0).astype(np.int32)

    def _evaluate(self, model, jitter_seed: int) -> float:
        model.eval()
        preds, gts = [], []
        for i, (image, mask) in enumerate(self.val_pairs):
            preds.append(self._predict_mask(model, image, mask, jitter_seed + i))
            gts.append(mask)
        return compute_miou(preds, gts, self.n_classes)

    # -- protocol operations ------------------------------------------------

    def zero_shot(self) -> tuple[float, float]:
        self._require_init()
        t0 = time.perf_counter()
        torch.manual_seed(self.seed)
        model, *_ = build_assembly(
            parse_config({"lora_enabled": False, "weight_decay": 0.0,
                          "learning_rate": 1e-5, "aug_hflip": False,
                          "aug_vflip": False, "aug_rotate": False,
                          "scheduler": "Cosine", "scheduler_params": {}}),
            self.seed, steps_per_epoch=1, backbone=self.backbone)
        miou = self._evaluate(model, jitter_seed=self.seed)
        return miou, time.perf_counter() - t0

    def step(self, config_payload: dict, epoch: int, run_id: str) -> tuple[float, float]:
        self._require_init()
        t0 = time.perf_counter()
        config = parse_config(config_payload)
        steps_per_epoch = max(1, (len(self.train_pairs) + BATCH_SIZE - 1) // BATCH_SIZE)
        run = self.runs.get(run_id)
        if run is None:
            if epoch != 1:
                raise ValueError(f"epoch order: got {epoch}, expected 1 for new run")
            torch.manual_seed(self.seed)
            model, optimizer, scheduler, cadence = build_assembly(
                config, self.seed, steps_per_epoch, self.backbone)
            run = RunState(config, model, optimizer, scheduler, cadence)
            self.runs[run_id] = run
        if epoch != run.next_epoch:
            raise ValueError(f"epoch order: got {epoch}, expected {run.next_epoch}")
        if epoch > MAX_EPOCHS:
            raise ValueError(f"epoch {epoch} beyond the {MAX_EPOCHS}-epoch cap")

        self._train_one_epoch(run, epoch)
        miou = self._evaluate(run.model, jitter_seed=self.seed + 1000 * epoch)
        if run.cadence == "plateau":
            run.scheduler.step(miou)
        elif run.cadence == "epoch":
            run.scheduler.step()
        run.next_epoch += 1
        return miou, time.perf_counter() - t0

    def _train_one_epoch(self, run: RunState, epoch: int) -> None:
        model, config = run.model, run.config
        model.train()
        torch.manual_seed(self.seed * 100003 + epoch)  # dropout streams
        rng = np.random.default_rng((self.seed, epoch))
        order = rng.permutation(len(self.train_pairs))
        for start in range(0, len(order), BATCH_SIZE):
            batch = order[start:start + BATCH_SIZE]
            run.optimizer.zero_grad()
            total = None
            for i in batch:
                image, mask = self.train_pairs[int(i)]
                image, mask = _augment(image, mask, config, rng)
                boxes = build_prompts(mask, int(rng.integers(1 << 31)))
                classes = sorted({cls for cls, _ in boxes}) or [1]
                for cls in classes:
                    prompt = rasterize_boxes(boxes, mask.shape, class_id=cls)
                    logits = self._forward_class(model, image, prompt)
                    target = torch.from_numpy((mask == cls).astype(np.float32))
                    loss = combined_loss(logits, target)
                    total = loss if total is None else total + loss
            if total is not None:
                (total / len(batch)).backward()
                run.optimizer.step()
                if run.cadence == "batch":
                    run.scheduler.step()
