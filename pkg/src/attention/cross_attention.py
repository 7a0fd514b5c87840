"""
Text-conditioned cross attention

Image tokens query the prompt embedding:

    out = softmax(q k^T / sqrt(d)) v,   q = W_q z,  k = W_k c_y,  v = W_v c_y

Besides the output, every call returns the raw score matrix q k^T (before
scaling and softmax); those scores are what the keyword-slice search reads.
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn as nn

from ..backbone.layers import norm
from ..backbone.lora import LoraConfig, LoraLinear
from ..utils.errors import ParameterError, ShapeError


@dataclass
class AttnWeights:
    """Projection matrices of one attention layer plus the aggregation map"""
    W_q: torch.Tensor  # d_model x d
    W_k: torch.Tensor  # d_model x e
    W_v: torch.Tensor  # d_model x e
    W_a: Optional[torch.Tensor] = None  # d_a x M


def attend(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, heads: int = 1) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Scaled dot-product attention that also reports raw scores

    Args:
        q: B x N x D queries
        k: B x L x D keys
        v: B x L x D values
        heads: Number of heads; D must be divisible by it

    Returns:
        (out B x N x D, raw scores B x N x L averaged over heads)
    """
    if q.dim() != 3 or k.dim() != 3 or v.dim() != 3:
        raise ShapeError("q, k, v must be B x tokens x D")
    if q.shape[-1] != k.shape[-1] or k.shape[:2] != v.shape[:2] or q.shape[0] != k.shape[0]:
        raise ShapeError(f"Incompatible shapes q{tuple(q.shape)} k{tuple(k.shape)} v{tuple(v.shape)}")
    dim = q.shape[-1]
    if dim <= 0 or heads < 1 or dim % heads:
        raise ParameterError(f"Feature dim {dim} not divisible into {heads} heads")

    b, n, _ = q.shape
    l = k.shape[1]
    dh = dim // heads
    qh = q.reshape(b, n, heads, dh).transpose(1, 2)
    kh = k.reshape(b, l, heads, dh).transpose(1, 2)
    vh = v.reshape(b, l, heads, v.shape[-1] // heads).transpose(1, 2)

    raw = qh @ kh.transpose(-1, -2)
    weights = torch.softmax(raw / math.sqrt(dh), dim=-1)
    out = (weights @ vh).transpose(1, 2).reshape(b, n, -1)
    return out, raw.mean(dim=1)


def cross_attention(z: torch.Tensor, c_y: torch.Tensor, w: AttnWeights,
                    heads: int = 1) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Functional cross attention with explicit weight matrices

    Args:
        z: B x N x d image tokens
        c_y: L x e (or B x L x e) prompt embedding
        w: Projection weights

    Returns:
        (out B x N x d_model, raw scores B x N x L)
    """
    if z.dim() != 3:
        raise ShapeError(f"Expected B x N x d tokens, got {tuple(z.shape)}")
    if c_y.dim() == 2:
        c_y = c_y.unsqueeze(0).expand(z.shape[0], -1, -1)
    if z.shape[-1] != w.W_q.shape[1]:
        raise ShapeError(f"W_q expects {w.W_q.shape[1]} input features, got {z.shape[-1]}")
    if c_y.shape[-1] != w.W_k.shape[1] or c_y.shape[-1] != w.W_v.shape[1]:
        raise ShapeError(f"W_k/W_v expect {w.W_k.shape[1]} prompt features, got {c_y.shape[-1]}")
    q = z @ w.W_q.T
    k = c_y @ w.W_k.T
    v = c_y @ w.W_v.T
    return attend(q, k, v, heads)


class CrossAttentionLayer(nn.Module):
    """
    Residual cross-attention block on a feature map

    GroupNorm -> q/k/v projections (LoRA adapted) -> attention -> output
    projection, added back to the input map.
    """

    def __init__(self, channels: int, context_dim: int, model_dim: Optional[int] = None,
                 heads: int = 1, lora: LoraConfig = LoraConfig()):
        super().__init__()
        model_dim = model_dim or channels
        self.heads = heads
        self.norm = norm(channels)
        self.to_q = LoraLinear(channels, model_dim, bias=False, lora=lora)
        self.to_k = LoraLinear(context_dim, model_dim, bias=False, lora=lora)
        self.to_v = LoraLinear(context_dim, model_dim, bias=False, lora=lora)
        self.to_out = nn.Linear(model_dim, channels)

    def forward(self, x: torch.Tensor, context: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Args:
            x: B x C x h x w feature map
            context: L x e or B x L x e prompt embedding

        Returns:
            (updated map, raw scores B x (h*w) x L)
        """
        b, c, h, w = x.shape
        if context.dim() == 2:
            context = context.unsqueeze(0).expand(b, -1, -1)
        tokens = self.norm(x).reshape(b, c, h * w).transpose(1, 2)
        out, scores = attend(self.to_q(tokens), self.to_k(context), self.to_v(context), self.heads)
        out = self.to_out(out).transpose(1, 2).reshape(b, c, h, w)
        return x + out, scores
