"""Backbones and LoRA adapters.

The toy backbone is a 3-layer conv net taking RGB plus a box-prompt channel;
its middle conv is the LoRA injection point and its zero-initialized 1x1
head makes the untrained net predict empty masks (so zero-shot is a genuine
pre-training baseline). LoRALinear carries the same adapter math for
attention/MLP linear layers of a large image encoder.
"""

from __future__ import annotations

import torch
import torch.nn as nn


class LoRAConv(nn.Module):
    """Frozen base conv plus trainable low-rank update B(A(x)), B zero-init."""

    def __init__(self, base: nn.Conv2d, rank: int, dropout: float):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.lora_a = nn.Conv2d(base.in_channels, rank, base.kernel_size,
                                padding=base.padding, bias=False)
        self.lora_b = nn.Conv2d(rank, base.out_channels, 1, bias=False)
        nn.init.zeros_(self.lora_b.weight)
        self.dropout = nn.Dropout2d(dropout)
        self.scale = 1.0 / rank

    def forward(self, x):
        return self.base(x) + self.scale * self.lora_b(self.lora_a(self.dropout(x)))


class LoRALinear(nn.Module):
    """Frozen base linear plus x A^T B^T; adapter shapes (rank, d_in), (d_out, rank)."""

    def __init__(self, base: nn.Linear, rank: int, dropout: float):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.lora_a = nn.Linear(base.in_features, rank, bias=False)
        self.lora_b = nn.Linear(rank, base.out_features, bias=False)
        nn.init.zeros_(self.lora_b.weight)
        self.dropout = nn.Dropout(dropout)
        self.scale = 1.0 / rank

    def forward(self, x):
        return self.base(x) + self.scale * self.lora_b(self.lora_a(self.dropout(x)))


class ToyBackbone(nn.Module):
    """conv(4->16) -> relu -> conv(16->16) -> relu -> 1x1 head per class query.

    encoder = first two convs, decoder = head. The head is bias-free,
    zero-initialized, and reads the conv features concatenated with the raw
    prompt channel: untrained logits are exactly 0 (empty predictions at the
    0 threshold), and one positive step on the prompt weight already flips
    in-box pixels, so the task stays learnable at the smallest grid learning
    rates even with a frozen (LoRA) encoder.
    """

    def __init__(self, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.conv_in = nn.Conv2d(4, 16, 3, padding=1)
        self.conv_mid = nn.Conv2d(16, 16, 3, padding=1)
        self.head = nn.Conv2d(17, 1, 1, bias=False)
        nn.init.zeros_(self.head.weight)
        self.act = nn.ReLU()

    def encoder_modules(self):
        return {"conv_in": self.conv_in, "conv_mid": self.conv_mid}

    def forward(self, x):
        prompt = x[:, 3:4]
        h = self.act(self.conv_in(x))
        h = self.act(self.conv_mid(h))
        return self.head(torch.cat([h, prompt], dim=1))[:, 0]


def apply_lora_toy(model: ToyBackbone, rank: int, dropout: float) -> ToyBackbone:
    """Freeze the encoder, wrap the middle conv with a LoRA adapter."""
    for p in model.conv_in.parameters():
        p.requires_grad_(False)
    model.conv_mid = LoRAConv(model.conv_mid, rank, dropout)
    return model


def encoder_trainable_params(model: ToyBackbone) -> int:
    total = 0
    for module in [model.conv_in, model.conv_mid]:
        total += sum(p.numel() for p in module.parameters() if p.requires_grad)
    return total


def lora_parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for name, p in model.named_parameters() if "lora_" in name)
