"""SAM backbone assembly: LoRA adapters on the image encoder's attention and
MLP linear layers, frozen base encoder, trainable mask decoder.

Requires the `segment_anything` package and a model checkpoint; the toy
backbone covers CPU-only environments with identical protocol semantics.
"""

from __future__ import annotations

import torch.nn as nn

from .config import WorkerConfig
from .models import LoRALinear

ENCODER_LORA_TARGETS = ("qkv", "proj", "lin1", "lin2")


def inject_encoder_lora(encoder: nn.Module, rank: int, dropout: float) -> int:
    """Wrap every attention/MLP linear named in ENCODER_LORA_TARGETS with a
    LoRA adapter and freeze everything else. Returns the wrapped-layer count."""
    for p in encoder.parameters():
        p.requires_grad_(False)
    wrapped = 0
    for module in encoder.modules():
        for name, child in list(module.named_children()):
            if isinstance(child, nn.Linear) and name in ENCODER_LORA_TARGETS:
                setattr(module, name, LoRALinear(child, rank, dropout))
                wrapped += 1
    return wrapped


def build_sam_assembly(config: WorkerConfig, seed: int,
                       checkpoint: str | None = None, model_type: str = "vit_b"):
    """(model, optimizer, scheduler, cadence) over a SAM backbone."""
    try:
        from segment_anything import sam_model_registry
    except ImportError as exc:
        raise RuntimeError(
            "the sam backbone needs the segment_anything package and a model "
            "checkpoint; use --backbone toy for CPU-only runs") from exc
    if checkpoint is None:
        raise RuntimeError("--sam-checkpoint is required with --backbone sam")
    import torch

    torch.manual_seed(seed)
    sam = sam_model_registry[model_type](checkpoint=checkpoint)
    if config.lora_enabled:
        inject_encoder_lora(sam.image_encoder, config.lora_rank, config.lora_dropout)
    else:
        for p in sam.image_encoder.parameters():
            p.requires_grad_(False)
    for p in sam.prompt_encoder.parameters():
        p.requires_grad_(False)
    trainable = [p for p in sam.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(trainable, lr=config.learning_rate,
                                  weight_decay=config.weight_decay)
    from .engine import build_scheduler

    scheduler, cadence = build_scheduler(optimizer, config, steps_per_epoch=100)
    return sam, optimizer, scheduler, cadence
