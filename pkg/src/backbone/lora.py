"""
Low-rank adapters for linear maps and 1x1 convolutions

    y = base(x) + scale * up @ (down @ x),   scale = alpha / rank

`up` starts at exactly zero, so a fresh adapter leaves the base map
unchanged bit for bit.
"""
from dataclasses import dataclass
from typing import Dict, Iterator, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..utils.errors import ParameterError, ShapeError


@dataclass(frozen=True)
class LoraConfig:
    rank: int = 4
    alpha: float = 4.0
    freeze_base: bool = False

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    @classmethod
    def from_config(cls, config: Dict = None) -> 'LoraConfig':
        config = config or {}
        return cls(
            rank=int(config.get('rank', cls.rank)),
            alpha=float(config.get('alpha', cls.alpha)),
            freeze_base=bool(config.get('freeze_base', cls.freeze_base)),
        )


class LoraAdapter(nn.Module):
    """
    Rank-r additive delta for a d_in -> d_out map

    Args:
        d_in: Input features of the adapted map
        d_out: Output features of the adapted map
        rank: Rank of the decomposition
        alpha: Scaling numerator, scale = alpha / rank
    """

    def __init__(self, d_in: int, d_out: int, rank: int = 4, alpha: float = 4.0):
        super().__init__()
        if rank < 1 or rank > min(d_in, d_out):
            raise ParameterError(f"LoRA rank {rank} must lie in [1, min({d_in}, {d_out})]")
        self.rank = rank
        self.scale = alpha / rank
        self.down = nn.Parameter(torch.randn(rank, d_in) / rank)
        self.up = nn.Parameter(torch.zeros(d_out, rank))

    def delta_weight(self) -> torch.Tensor:
        return self.scale * (self.up @ self.down)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Delta applied to x (..., d_in) -> (..., d_out)"""
        return self.scale * F.linear(F.linear(x, self.down), self.up)

    def num_trainable(self) -> int:
        return self.down.numel() + self.up.numel()


def lora_forward(base: Union[nn.Linear, nn.Conv2d], adapter: LoraAdapter, x: torch.Tensor) -> torch.Tensor:
    """
    base(x) + scale * up (down x)

    Works for nn.Linear on (..., d_in) inputs and for 1x1 nn.Conv2d on
    B x C x H x W inputs.
    """
    if isinstance(base, nn.Conv2d):
        if base.kernel_size != (1, 1):
            raise ShapeError(f"LoRA only adapts 1x1 convolutions, got kernel {base.kernel_size}")
        if x.dim() != 4 or x.shape[1] != base.in_channels:
            raise ShapeError(f"Expected B x {base.in_channels} x H x W input, got {tuple(x.shape)}")
        delta = adapter(x.movedim(1, -1)).movedim(-1, 1)
        return base(x) + delta
    if x.shape[-1] != base.in_features:
        raise ShapeError(f"Expected last dim {base.in_features}, got {x.shape[-1]}")
    return base(x) + adapter(x)


class LoraLinear(nn.Module):
    """nn.Linear with a low-rank adapter"""

    def __init__(self, in_features: int, out_features: int, bias: bool = True,
                 lora: LoraConfig = LoraConfig()):
        super().__init__()
        self.base = nn.Linear(in_features, out_features, bias=bias)
        self.adapter = LoraAdapter(in_features, out_features, lora.rank, lora.alpha)
        if lora.freeze_base:
            for p in self.base.parameters():
                p.requires_grad = False

    @property
    def weight(self) -> torch.Tensor:
        return self.base.weight

    @property
    def bias(self):
        return self.base.bias

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return lora_forward(self.base, self.adapter, x)

    @torch.no_grad()
    def merge(self) -> None:
        """Fold the delta into the base weight and reset the adapter"""
        self.base.weight += self.adapter.delta_weight()
        self.adapter.up.zero_()


class LoraConv2d(nn.Module):
    """1x1 nn.Conv2d with a low-rank adapter"""

    def __init__(self, in_channels: int, out_channels: int, bias: bool = True,
                 lora: LoraConfig = LoraConfig()):
        super().__init__()
        self.base = nn.Conv2d(in_channels, out_channels, kernel_size=1, bias=bias)
        self.adapter = LoraAdapter(in_channels, out_channels, lora.rank, lora.alpha)
        if lora.freeze_base:
            for p in self.base.parameters():
                p.requires_grad = False

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return lora_forward(self.base, self.adapter, x)

    @torch.no_grad()
    def merge(self) -> None:
        """Fold the delta into the base weight and reset the adapter"""
        self.base.weight += self.adapter.delta_weight()[:, :, None, None]
        self.adapter.up.zero_()


def lora_modules(model: nn.Module) -> Iterator[nn.Module]:
    for module in model.modules():
        if isinstance(module, (LoraLinear, LoraConv2d)):
            yield module


def lora_parameters(model: nn.Module) -> Iterator[nn.Parameter]:
    """Adapter parameters only (the fine-tuned set)"""
    for module in lora_modules(model):
        yield from module.adapter.parameters()
