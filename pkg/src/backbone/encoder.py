"""
Deterministic image encoder E: H x W x 3 image -> (H/f) x (W/f) x d latent
"""
import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..utils.errors import ParameterError, ShapeError
from .layers import Downsample, ResBlock, norm


class ImageEncoder(nn.Module):
    """
    Args:
        latent_channels: Latent width d
        base_channels: Width of the first stage
        downsample: Spatial reduction factor f, a power of two
    """

    def __init__(self, latent_channels: int = 16, base_channels: int = 32, downsample: int = 4):
        super().__init__()
        if downsample < 1 or downsample & (downsample - 1):
            raise ParameterError(f"Encoder downsample factor must be a power of two, got {downsample}")
        self.downsample = downsample
        self.latent_channels = latent_channels

        stages = int(math.log2(downsample))
        self.conv_in = nn.Conv2d(3, base_channels, kernel_size=3, padding=1)
        blocks = []
        for _ in range(stages):
            blocks.append(ResBlock(base_channels, base_channels))
            blocks.append(Downsample(base_channels))
        blocks.append(ResBlock(base_channels, base_channels))
        self.blocks = nn.ModuleList(blocks)
        self.norm_out = norm(base_channels)
        self.conv_out = nn.Conv2d(base_channels, latent_channels, kernel_size=3, padding=1)

    def check_input(self, x: torch.Tensor) -> None:
        if x.dim() != 4 or x.shape[1] != 3:
            raise ShapeError(f"Expected B x 3 x H x W image, got {tuple(x.shape)}")
        h, w = x.shape[-2:]
        if h % self.downsample or w % self.downsample:
            raise ShapeError(f"Image size {h}x{w} not divisible by downsample factor {self.downsample}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        h = self.conv_in(x * 2.0 - 1.0)
        for block in self.blocks:
            h = block(h)
        return self.conv_out(F.silu(self.norm_out(h)))


def pre_upsample(x_lr: torch.Tensor, scale: int = 4) -> torch.Tensor:
    """Bicubic upsampling of the LR input to the target size, clamped to [0, 1]"""
    if x_lr.dim() != 4:
        raise ShapeError(f"Expected B x C x h x w image, got {tuple(x_lr.shape)}")
    if scale == 1:
        return x_lr
    up = F.interpolate(x_lr, scale_factor=scale, mode='bicubic', align_corners=False)
    return up.clamp(0.0, 1.0)
