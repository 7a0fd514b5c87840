"""
Joint image / text-segmentation decoders
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..backbone.layers import ResBlock, Upsample, norm
from ..backbone.lora import LoraConfig, LoraConv2d
from ..utils.errors import ParameterError, ShapeError
from ..utils.logger import get_logger
from .blocks import CrossDecoderInteractionBlock

logger = get_logger()


@dataclass(frozen=True)
class DecoderConfig:
    """
    Decoder layout: one entry per CDIB level

    channels[i] is the width of both streams at level i, upsample[i] the
    resize factor entering that level. The product of the factors must equal
    the encoder downsample factor.
    """
    latent_channels: int = 16
    attn_channels: int = 16
    channels: Tuple[int, ...] = field(default=(32, 32, 16))
    upsample: Tuple[int, ...] = field(default=(2, 2, 1))

    def __post_init__(self):
        if len(self.channels) == 0 or len(self.channels) != len(self.upsample):
            raise ParameterError("decoder.channels and decoder.upsample need one entry per level")
        if any(c < 2 or c % 2 for c in self.channels):
            raise ParameterError(f"Decoder channels must be even, got {self.channels}")
        if any(u < 1 for u in self.upsample):
            raise ParameterError(f"Upsample factors must be >= 1, got {self.upsample}")
        if self.latent_channels < 1 or self.attn_channels < 1:
            raise ParameterError("Decoder input widths must be positive")

    @classmethod
    def from_config(cls, config: Dict = None) -> 'DecoderConfig':
        config = config or {}
        return cls(
            latent_channels=int(config.get('latent_channels', cls.latent_channels)),
            attn_channels=int(config.get('attn_channels', cls.attn_channels)),
            channels=tuple(int(c) for c in config.get('channels', (32, 32, 16))),
            upsample=tuple(int(u) for u in config.get('upsample', (2, 2, 1))),
        )

    @property
    def levels(self) -> int:
        return len(self.channels)

    @property
    def scale(self) -> int:
        return math.prod(self.upsample)


class _Stream(nn.Module):
    """
    conv_in, then per level an upsample and a ResBlock, then the output head

    With a LoRA config each level ends in an adapted 1x1 projection.
    """

    def __init__(self, in_channels: int, out_channels: int, cfg: DecoderConfig,
                 lora: Optional[LoraConfig] = None):
        super().__init__()
        self.conv_in = nn.Conv2d(in_channels, cfg.channels[0], kernel_size=3, padding=1)
        self.ups = nn.ModuleList()
        self.blocks = nn.ModuleList()
        self.projections = nn.ModuleList()
        prev = cfg.channels[0]
        for ch, factor in zip(cfg.channels, cfg.upsample):
            self.ups.append(Upsample(prev, ch, factor=factor))
            self.blocks.append(ResBlock(ch, ch))
            if lora is not None:
                proj = LoraConv2d(ch, ch, lora=lora)
                # frozen identity base; the adapter carries the learned part
                nn.init.dirac_(proj.base.weight)
                nn.init.zeros_(proj.base.bias)
                self.projections.append(proj)
            prev = ch
        self.norm_out = norm(prev)
        self.conv_out = nn.Conv2d(prev, out_channels, kernel_size=3, padding=1)

    def level(self, i: int, h: torch.Tensor) -> torch.Tensor:
        h = self.blocks[i](self.ups[i](h))
        return self.projections[i](h) if len(self.projections) else h

    def head(self, h: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.conv_out(F.silu(self.norm_out(h))))


class JointSegmentationDecoder(nn.Module):
    """
    Image decoder and mirrored segmentation decoder coupled by a CDIB per level

    Args:
        cfg: Layout of both streams
        lora: Adapter config for the image-side 1x1 convolutions (stream
            projections and CDIB image branch)
    """

    def __init__(self, cfg: DecoderConfig = DecoderConfig(), lora: LoraConfig = LoraConfig()):
        super().__init__()
        self.cfg = cfg
        self.image_stream = _Stream(cfg.latent_channels, 3, cfg, lora=lora)
        self.seg_stream = _Stream(cfg.attn_channels, 1, cfg)
        self.interactions = nn.ModuleList(
            [CrossDecoderInteractionBlock(ch, lora=lora) for ch in cfg.channels]
        )

    def freeze_interaction(self) -> None:
        for block in self.interactions:
            block.freeze_interaction()
        logger.debug("CDIB residual scales frozen at zero")

    def decode_joint(self, z_hat: torch.Tensor, a_tex: torch.Tensor,
                     interact: bool = True) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            z_hat: B x d x h x w denoised latent
            a_tex: B x d_a x h x w aggregated keyword attention
            interact: Apply the CDIBs; False runs the two decoders independently

        Returns:
            (x_hat B x 3 x H x W, s_hat B x 1 x H x W), both in [0, 1]
        """
        if z_hat.dim() != 4 or a_tex.dim() != 4:
            raise ShapeError("Decoder inputs must be B x C x h x w")
        if z_hat.shape[-2:] != a_tex.shape[-2:]:
            raise ShapeError(
                f"Latent {tuple(z_hat.shape[-2:])} and attention {tuple(a_tex.shape[-2:])} sizes differ")
        if z_hat.shape[0] != a_tex.shape[0]:
            raise ShapeError(f"Batch sizes differ: {z_hat.shape[0]} vs {a_tex.shape[0]}")
        if z_hat.shape[1] != self.cfg.latent_channels or a_tex.shape[1] != self.cfg.attn_channels:
            raise ShapeError(
                f"Expected {self.cfg.latent_channels}/{self.cfg.attn_channels} input channels, "
                f"got {z_hat.shape[1]}/{a_tex.shape[1]}")

        z = self.image_stream.conv_in(z_hat)
        a = self.seg_stream.conv_in(a_tex)
        for i, block in enumerate(self.interactions):
            z = self.image_stream.level(i, z)
            a = self.seg_stream.level(i, a)
            if interact:
                z, a = block(z, a)
        return self.image_stream.head(z), self.seg_stream.head(a)

    def forward(self, z_hat: torch.Tensor, a_tex: torch.Tensor,
                interact: bool = True) -> Tuple[torch.Tensor, torch.Tensor]:
        return self.decode_joint(z_hat, a_tex, interact=interact)
