"""
Cross-decoder interaction block

Each branch runs two ResBlocks and a 1x1 split convolution; the first
channel half is kept, the second half is sent to the other branch, where it
passes through a sigmoid and gates the kept half. The gated features go
through GroupNorm -> SiLU -> 1x1 conv and are added back to the branch
input, scaled by a learnable scalar that starts at zero.
"""
from typing import Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..backbone.layers import ResBlock, norm
from ..backbone.lora import LoraConfig, LoraConv2d
from ..utils.errors import ShapeError


class _Branch(nn.Module):
    """One side of the block: features -> (keep, send) -> gated -> residual update"""

    def __init__(self, channels: int, lora: LoraConfig = None):
        super().__init__()
        half = channels // 2
        self.res1 = ResBlock(channels, channels)
        self.res2 = ResBlock(channels, channels)
        if lora is not None:
            self.split = LoraConv2d(channels, channels, lora=lora)
            self.post = LoraConv2d(half, channels, lora=lora)
        else:
            self.split = nn.Conv2d(channels, channels, kernel_size=1)
            self.post = nn.Conv2d(half, channels, kernel_size=1)
        self.norm = norm(half)
        self.residual_scale = nn.Parameter(torch.zeros(()))

    def halves(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = self.split(self.res2(self.res1(x)))
        keep, send = torch.chunk(h, 2, dim=1)
        return keep, send

    def update(self, x: torch.Tensor, keep: torch.Tensor, received: torch.Tensor) -> torch.Tensor:
        gated = keep * torch.sigmoid(received)
        result = self.post(F.silu(self.norm(gated)))
        return x + self.residual_scale * result


class CrossDecoderInteractionBlock(nn.Module):
    """
    Couples the image and segmentation decoder streams at one level

    Args:
        channels: Width of both streams, must be even
        lora: Adapter config for the image branch 1x1 convolutions
    """

    def __init__(self, channels: int, lora: LoraConfig = LoraConfig()):
        super().__init__()
        if channels < 2 or channels % 2:
            raise ShapeError(f"CDIB channel count must be even, got {channels}")
        self.channels = channels
        self.image_branch = _Branch(channels, lora=lora)
        self.seg_branch = _Branch(channels)

    @property
    def residual_scales(self) -> Tuple[nn.Parameter, nn.Parameter]:
        return self.image_branch.residual_scale, self.seg_branch.residual_scale

    def freeze_interaction(self) -> None:
        """Pin both residual scales at zero (no cross-decoder exchange)"""
        for scale in self.residual_scales:
            with torch.no_grad():
                scale.zero_()
            scale.requires_grad = False

    def forward(self, z_in: torch.Tensor, a_in: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        if z_in.dim() != 4 or a_in.dim() != 4:
            raise ShapeError("CDIB inputs must be B x C x H x W")
        if z_in.shape[1] != self.channels or a_in.shape[1] != self.channels:
            raise ShapeError(
                f"CDIB expects {self.channels} channels, got {z_in.shape[1]} and {a_in.shape[1]}")
        if z_in.shape[-2:] != a_in.shape[-2:] or z_in.shape[0] != a_in.shape[0]:
            raise ShapeError(f"Stream shapes differ: {tuple(z_in.shape)} vs {tuple(a_in.shape)}")

        z_keep, z_send = self.image_branch.halves(z_in)
        a_keep, a_send = self.seg_branch.halves(a_in)
        z_out = self.image_branch.update(z_in, z_keep, a_send)
        a_out = self.seg_branch.update(a_in, a_keep, z_send)
        return z_out, a_out


def cdib_forward(z_in: torch.Tensor, a_in: torch.Tensor,
                 p: CrossDecoderInteractionBlock) -> Tuple[torch.Tensor, torch.Tensor]:
    return p(z_in, a_in)
