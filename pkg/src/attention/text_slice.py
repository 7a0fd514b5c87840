"""
Keyword attention: slice search, multi-layer aggregation, attention stack
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..utils.errors import ParameterError, ShapeError


@dataclass
class AttnStack:
    """
    Attention collected from one U-Net pass

    per_layer[m] is the raw B x (h_m*w_m) x L score matrix of layer m,
    spatial_dims[m] its (h_m, w_m), tex_maps[m] the keyword column reshaped
    to B x h_m x w_m and aggregated the projected B x d_a x h x w map.
    """
    per_layer: List[torch.Tensor] = field(default_factory=list)
    spatial_dims: List[Tuple[int, int]] = field(default_factory=list)
    tex_index: Optional[int] = None
    tex_maps: List[torch.Tensor] = field(default_factory=list)
    aggregated: Optional[torch.Tensor] = None

    def __len__(self) -> int:
        return len(self.per_layer)

    def record(self, scores: torch.Tensor, dims: Tuple[int, int]) -> None:
        self.per_layer.append(scores)
        self.spatial_dims.append((int(dims[0]), int(dims[1])))

    def extract(self, tex_index: int) -> List[torch.Tensor]:
        """Fill tex_maps with the keyword slice of every layer"""
        self.tex_index = tex_index
        self.tex_maps = [
            search_text_slice(a, tex_index, dims)
            for a, dims in zip(self.per_layer, self.spatial_dims)
        ]
        return self.tex_maps


def search_text_slice(a: torch.Tensor, tex_index: int, spatial_dims: Sequence[int]) -> torch.Tensor:
    """
    Column tex_index of a score matrix reshaped to a spatial map

    Args:
        a: N x L or B x N x L scores
        tex_index: Keyword token position
        spatial_dims: (h, w) with h * w == N

    Returns:
        h x w (or B x h x w) map
    """
    if a.dim() not in (2, 3):
        raise ShapeError(f"Score matrix must be N x L or B x N x L, got {tuple(a.shape)}")
    n, l = a.shape[-2:]
    if not 0 <= tex_index < l:
        raise ParameterError(f"tex_index {tex_index} outside [0, {l})")
    h, w = int(spatial_dims[0]), int(spatial_dims[1])
    if h * w != n:
        raise ShapeError(f"Spatial dims {h}x{w} do not match {n} image tokens")
    column = a[..., tex_index]
    return column.reshape(*a.shape[:-2], h, w)


def aggregate_attention(tex_maps: Sequence[torch.Tensor], target: Tuple[int, int],
                        W_a: torch.Tensor) -> torch.Tensor:
    """
    Resize, concatenate and project the per-layer keyword maps

    Each map is bilinearly resized to target, the M maps are stacked as
    channels and W_a (d_a x M) mixes them into d_a channels.

    Args:
        tex_maps: M maps, each h_m x w_m or B x h_m x w_m
        target: (h, w) of the denoised latent
        W_a: d_a x M projection

    Returns:
        B x d_a x h x w (batch dim of size 1 for unbatched maps)
    """
    if len(tex_maps) == 0:
        raise ParameterError("Cannot aggregate an empty list of attention maps")
    if W_a.dim() != 2 or W_a.shape[1] != len(tex_maps):
        raise ShapeError(f"W_a must be d_a x {len(tex_maps)}, got {tuple(W_a.shape)}")
    h, w = int(target[0]), int(target[1])

    channels = []
    for m in tex_maps:
        if m.dim() == 2:
            m = m.unsqueeze(0)
        if m.shape[-1] <= 0 or m.shape[-2] <= 0:
            raise ParameterError("Attention maps must have positive spatial size")
        m = m.unsqueeze(1)
        if tuple(m.shape[-2:]) != (h, w):
            m = F.interpolate(m, size=(h, w), mode='bilinear', align_corners=False)
        channels.append(m)
    stacked = torch.cat(channels, dim=1)
    return torch.einsum('dm,bmhw->bdhw', W_a.to(stacked.dtype), stacked)


class TextAttentionAggregator(nn.Module):
    """
    Learnable W_a plus the constant input used when keyword attention is disabled

    Args:
        num_layers: M cross-attention layers feeding the aggregation
        out_channels: d_a
    """

    def __init__(self, num_layers: int, out_channels: int = 16):
        super().__init__()
        if num_layers < 1:
            raise ParameterError("At least one attention layer is required")
        self.W_a = nn.Parameter(torch.randn(out_channels, num_layers) / num_layers)
        self.constant = nn.Parameter(torch.zeros(1, out_channels, 1, 1))

    @property
    def out_channels(self) -> int:
        return self.W_a.shape[0]

    def forward(self, stack: AttnStack, tex_index: int, target: Tuple[int, int]) -> torch.Tensor:
        stack.extract(tex_index)
        stack.aggregated = aggregate_attention(stack.tex_maps, target, self.W_a)
        return stack.aggregated

    def constant_input(self, batch: int, target: Tuple[int, int]) -> torch.Tensor:
        """Learned constant map replacing a_tex"""
        return self.constant.expand(batch, -1, int(target[0]), int(target[1]))
