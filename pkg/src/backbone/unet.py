"""
Miniature cross-attention U-Net predicting the noise in a latent

Cross-attention layers are placed at the bottleneck first and then spread
round-robin over the decoder levels from coarse to fine; each one records
its raw score matrix into an AttnStack during the forward pass.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..attention.cross_attention import CrossAttentionLayer
from ..attention.text_slice import AttnStack
from ..utils.errors import ParameterError, ShapeError
from .layers import Downsample, ResBlock, Upsample, norm, timestep_embedding
from .lora import LoraConfig


@dataclass(frozen=True)
class UNetConfig:
    base_channels: int = 32
    num_resolutions: int = 3
    cross_attn_layers: int = 4
    attn_heads: int = 1
    latent_channels: int = 16
    downsample: int = 4
    context_dim: int = 32
    channel_mult: Tuple[int, ...] = field(default=(1, 2, 4))

    def __post_init__(self):
        if self.cross_attn_layers < 1:
            raise ParameterError("cross_attn_layers (M) must be >= 1")
        positive = (self.base_channels, self.num_resolutions, self.attn_heads,
                    self.latent_channels, self.downsample, self.context_dim)
        if min(positive) < 1:
            raise ParameterError("All U-Net sizes must be positive")
        if len(self.channel_mult) < self.num_resolutions:
            raise ParameterError(
                f"channel_mult needs {self.num_resolutions} entries, got {len(self.channel_mult)}")

    @classmethod
    def from_config(cls, config: Dict = None) -> 'UNetConfig':
        config = config or {}
        levels = int(config.get('num_resolutions', cls.num_resolutions))
        mult = config.get('channel_mult') or [min(2 ** i, 4) for i in range(levels)]
        return cls(
            base_channels=int(config.get('base_channels', cls.base_channels)),
            num_resolutions=levels,
            cross_attn_layers=int(config.get('cross_attn_layers', cls.cross_attn_layers)),
            attn_heads=int(config.get('attn_heads', cls.attn_heads)),
            latent_channels=int(config.get('latent_channels', cls.latent_channels)),
            downsample=int(config.get('downsample', cls.downsample)),
            context_dim=int(config.get('context_dim', cls.context_dim)),
            channel_mult=tuple(int(m) for m in mult),
        )

    @property
    def channels(self) -> List[int]:
        return [self.base_channels * m for m in self.channel_mult[:self.num_resolutions]]


def attention_placement(num_layers: int, num_resolutions: int) -> Tuple[int, List[int]]:
    """
    Split M attention layers into (bottleneck count, per-up-level counts)

    One layer sits at the bottleneck; the rest go round-robin over up levels
    R-2 .. 0 (or the single level when R == 1).
    """
    per_level = [0] * num_resolutions
    order = list(range(num_resolutions - 2, -1, -1)) or [num_resolutions - 1]
    for i in range(num_layers - 1):
        per_level[order[i % len(order)]] += 1
    return 1, per_level


class UNet(nn.Module):
    """Noise predictor U(z; t, c_y)"""

    def __init__(self, cfg: UNetConfig = UNetConfig(), lora: LoraConfig = LoraConfig()):
        super().__init__()
        self.cfg = cfg
        chs = cfg.channels
        time_dim = cfg.base_channels * 4

        self.time_mlp = nn.Sequential(
            nn.Linear(cfg.base_channels, time_dim),
            nn.SiLU(),
            nn.Linear(time_dim, time_dim),
        )
        self.conv_in = nn.Conv2d(cfg.latent_channels, chs[0], kernel_size=3, padding=1)

        def attn(channels: int) -> CrossAttentionLayer:
            return CrossAttentionLayer(channels, cfg.context_dim, heads=cfg.attn_heads, lora=lora)

        self.down_blocks = nn.ModuleList()
        self.downsamplers = nn.ModuleList()
        prev = chs[0]
        for level, ch in enumerate(chs):
            self.down_blocks.append(ResBlock(prev, ch, time_dim))
            prev = ch
            if level < cfg.num_resolutions - 1:
                self.downsamplers.append(Downsample(ch))

        _, per_level = attention_placement(cfg.cross_attn_layers, cfg.num_resolutions)
        self.mid_block1 = ResBlock(prev, prev, time_dim)
        self.mid_attn = attn(prev)
        self.mid_block2 = ResBlock(prev, prev, time_dim)

        self.up_blocks = nn.ModuleList()
        self.up_attn = nn.ModuleList()
        self.upsamplers = nn.ModuleList()
        for level in reversed(range(cfg.num_resolutions)):
            ch = chs[level]
            self.up_blocks.append(ResBlock(prev + ch, ch, time_dim))
            self.up_attn.append(nn.ModuleList([attn(ch) for _ in range(per_level[level])]))
            prev = ch
            if level > 0:
                self.upsamplers.append(Upsample(ch, ch, factor=2))

        self.norm_out = norm(prev)
        self.conv_out = nn.Conv2d(prev, cfg.latent_channels, kernel_size=3, padding=1)

    @property
    def num_attention_layers(self) -> int:
        return 1 + sum(len(layers) for layers in self.up_attn)

    def forward(self, z: torch.Tensor, t: int, context: torch.Tensor) -> Tuple[torch.Tensor, AttnStack]:
        """
        Args:
            z: B x d x h x w latent
            t: Integer time step
            context: L x e prompt embedding

        Returns:
            (noise estimate shaped like z, AttnStack with M raw score matrices)
        """
        if z.dim() != 4 or z.shape[1] != self.cfg.latent_channels:
            raise ShapeError(f"Expected B x {self.cfg.latent_channels} x h x w latent, got {tuple(z.shape)}")
        factor = 2 ** (self.cfg.num_resolutions - 1)
        if z.shape[-2] % factor or z.shape[-1] % factor:
            raise ShapeError(f"Latent size {tuple(z.shape[-2:])} not divisible by {factor}")

        stack = AttnStack()
        steps = torch.full((z.shape[0],), int(t), device=z.device)
        temb = self.time_mlp(timestep_embedding(steps, self.cfg.base_channels).to(z.dtype))
        context = context.to(z.dtype)

        h = self.conv_in(z)
        skips = []
        for level, block in enumerate(self.down_blocks):
            h = block(h, temb)
            skips.append(h)
            if level < len(self.downsamplers):
                h = self.downsamplers[level](h)

        h = self.mid_block1(h, temb)
        h, scores = self.mid_attn(h, context)
        stack.record(scores, h.shape[-2:])
        h = self.mid_block2(h, temb)

        for i, (block, layers) in enumerate(zip(self.up_blocks, self.up_attn)):
            h = block(torch.cat([h, skips.pop()], dim=1), temb)
            for layer in layers:
                h, scores = layer(h, context)
                stack.record(scores, h.shape[-2:])
            if i < len(self.upsamplers):
                h = self.upsamplers[i](h)

        return self.conv_out(F.silu(self.norm_out(h))), stack
