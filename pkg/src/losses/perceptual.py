"""
Perceptual distance between images

The default compares Sobel gradient stacks over a Gaussian pyramid; any
callable (x_hat, x) -> scalar tensor can be registered in its place.
"""
from typing import Callable, Dict

import torch

from ..utils.errors import ParameterError, ShapeError
from .sobel import gaussian_pyramid, sobel

PerceptualDistance = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]

PYRAMID_LEVELS = 3


def pyramid_gradient_distance(x_hat: torch.Tensor, x: torch.Tensor,
                              levels: int = PYRAMID_LEVELS) -> torch.Tensor:
    """Mean L1 distance between Sobel stacks, averaged over pyramid levels"""
    if x_hat.shape != x.shape:
        raise ShapeError(f"Image shapes differ: {tuple(x_hat.shape)} vs {tuple(x.shape)}")
    pairs = zip(gaussian_pyramid(x_hat, levels), gaussian_pyramid(x, levels))
    terms = [torch.mean(torch.abs(sobel(a) - sobel(b))) for a, b in pairs]
    return torch.stack(terms).mean()


def zero_distance(x_hat: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    return x_hat.new_zeros(())


_REGISTRY: Dict[str, PerceptualDistance] = {
    'pyramid_gradient': pyramid_gradient_distance,
    'none': zero_distance,
}


def register_perceptual(name: str, fn: PerceptualDistance) -> None:
    _REGISTRY[name] = fn


def get_perceptual(name: str = 'pyramid_gradient') -> PerceptualDistance:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ParameterError(
            f"Unknown perceptual distance '{name}', available: {sorted(_REGISTRY)}") from None


def perceptual_distance(x_hat: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    return pyramid_gradient_distance(x_hat, x)
