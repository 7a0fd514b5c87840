"""
Loss terms for joint super-resolution and text segmentation
"""
from .objective import (
    LossBreakdown,
    LossWeights,
    dice_loss,
    focal_loss,
    img_loss,
    loss_breakdown,
    mf_loss,
    seg_loss,
    total_loss,
)
from .perceptual import get_perceptual, perceptual_distance, register_perceptual
from .sobel import sobel

__all__ = [
    'LossBreakdown', 'LossWeights', 'dice_loss', 'focal_loss', 'img_loss', 'loss_breakdown',
    'mf_loss', 'seg_loss', 'total_loss', 'get_perceptual', 'perceptual_distance',
    'register_perceptual', 'sobel',
]
