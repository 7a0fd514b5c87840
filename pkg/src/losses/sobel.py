"""
Sobel gradients and Gaussian pyramids on B x C x H x W tensors
"""
from typing import List

import torch
import torch.nn.functional as F

from ..utils.errors import ShapeError

SOBEL_X = torch.tensor([[-1.0, 0.0, 1.0],
                        [-2.0, 0.0, 2.0],
                        [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.contiguous()

# binomial approximation of a Gaussian, sigma ~ 1
BINOMIAL_5 = torch.tensor([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _depthwise(x: torch.Tensor, kernel: torch.Tensor, stride: int = 1) -> torch.Tensor:
    """Apply one 2-D kernel to every channel independently, replicate padding"""
    if x.dim() != 4:
        raise ShapeError(f"Expected B x C x H x W tensor, got {tuple(x.shape)}")
    c = x.shape[1]
    k = kernel.to(device=x.device, dtype=x.dtype)
    pad = k.shape[-1] // 2
    weight = k.expand(c, 1, *k.shape)
    x = F.pad(x, (pad, pad, pad, pad), mode='replicate')
    return F.conv2d(x, weight, stride=stride, groups=c)


def sobel(x: torch.Tensor) -> torch.Tensor:
    """
    Horizontal and vertical 3x3 Sobel responses per channel

    Returns:
        B x 2C x H x W: the C horizontal maps followed by the C vertical maps
    """
    gx = _depthwise(x, SOBEL_X)
    gy = _depthwise(x, SOBEL_Y)
    return torch.cat([gx, gy], dim=1)


def gaussian_pyramid(x: torch.Tensor, levels: int = 3) -> List[torch.Tensor]:
    """[x, blur(x)/2, blur(blur(x)/2)/2, ...] with a 5x5 binomial kernel"""
    kernel = torch.outer(BINOMIAL_5, BINOMIAL_5)
    pyramid = [x]
    for _ in range(levels - 1):
        if min(pyramid[-1].shape[-2:]) < 2:
            break
        pyramid.append(_depthwise(pyramid[-1], kernel, stride=2))
    return pyramid
