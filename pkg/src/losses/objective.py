"""
Training objective

    loss_img = MSE(x_hat, x) + l1 * perceptual(x_hat, x) + l2 * mf(x_hat, x, s_hat, s)
    loss_seg = MSE(s_hat, s) + l3 * focal(s_hat, s) + l4 * dice(s_hat, s)
    loss_total = loss_img + loss_seg

All norms reduce by mean. Images are B x C x H x W, masks B x 1 x H x W.
"""
from dataclasses import dataclass
from typing import Dict, Optional

import torch
import torch.nn.functional as F

from ..utils.errors import DomainError, ParameterError, ShapeError
from .perceptual import PerceptualDistance, get_perceptual
from .sobel import sobel

FOCAL_CLAMP = 1e-6


@dataclass(frozen=True)
class LossWeights:
    perceptual: float = 5.0
    mf: float = 10.0
    focal: float = 10.0
    dice: float = 1.0
    gamma: float = 2.0
    dice_smooth: float = 1.0
    distance: str = 'pyramid_gradient'

    def __post_init__(self):
        for name in ('perceptual', 'mf', 'focal', 'dice', 'gamma', 'dice_smooth'):
            if getattr(self, name) < 0:
                raise ParameterError(f"Loss weight '{name}' must be non-negative")

    @classmethod
    def from_config(cls, config: Dict = None) -> 'LossWeights':
        config = config or {}
        return cls(
            perceptual=float(config.get('perceptual', cls.perceptual)),
            mf=float(config.get('mf', cls.mf)),
            focal=float(config.get('focal', cls.focal)),
            dice=float(config.get('dice', cls.dice)),
            gamma=float(config.get('gamma', cls.gamma)),
            dice_smooth=float(config.get('dice_smooth', cls.dice_smooth)),
            distance=str(config.get('distance', cls.distance)),
        )


@dataclass
class LossBreakdown:
    total: torch.Tensor
    img: torch.Tensor
    seg: torch.Tensor
    mf: torch.Tensor  # weighted contribution l2 * mf

    def as_log(self) -> Dict[str, float]:
        return {
            'loss_total': float(self.total.detach()),
            'loss_img': float(self.img.detach()),
            'loss_seg': float(self.seg.detach()),
            'loss_mf': float(self.mf.detach()),
        }


def _check_mask(mask: torch.Tensor, name: str) -> None:
    with torch.no_grad():
        if not torch.all((mask >= 0) & (mask <= 1)):
            raise DomainError(f"Mask '{name}' has values outside [0, 1]")


def _check_same(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"Shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def misclassification_weight(s_hat: Optional[torch.Tensor], s: torch.Tensor, gamma: float) -> torch.Tensor:
    """
    [1 - s_hat*s - (1 - s_hat)*(1 - s)]^gamma per pixel

    Without a predicted mask the ground-truth mask alone is used, s^gamma,
    which weights text pixels only.
    """
    if s_hat is None:
        return s ** gamma
    return (1.0 - s_hat * s - (1.0 - s_hat) * (1.0 - s)) ** gamma


def mf_loss(x_hat: torch.Tensor, x: torch.Tensor, s_hat: Optional[torch.Tensor], s: torch.Tensor,
            gamma: float = 2.0) -> torch.Tensor:
    """Edge loss weighted by the segmentation error map"""
    _check_same(x_hat, x)
    _check_mask(s, 's')
    if s_hat is not None:
        _check_same(s_hat, s)
        _check_mask(s_hat, 's_hat')
    if s.shape[-2:] != x.shape[-2:]:
        raise ShapeError(f"Mask {tuple(s.shape[-2:])} and image {tuple(x.shape[-2:])} sizes differ")
    weight = misclassification_weight(s_hat, s, gamma)
    diff = (sobel(x_hat) - sobel(x)) ** 2
    return torch.mean(weight * diff)


def focal_loss(s_hat: torch.Tensor, s: torch.Tensor, gamma: float = 2.0) -> torch.Tensor:
    """Binary focal loss without class weighting"""
    _check_same(s_hat, s)
    p = s_hat.clamp(FOCAL_CLAMP, 1.0 - FOCAL_CLAMP)
    p_t = p * s + (1.0 - p) * (1.0 - s)
    return torch.mean(-((1.0 - p_t) ** gamma) * torch.log(p_t))


def dice_loss(s_hat: torch.Tensor, s: torch.Tensor, eps: float = 1.0) -> torch.Tensor:
    """1 - smoothed Dice coefficient, per sample then averaged over the batch"""
    _check_same(s_hat, s)
    dims = tuple(range(1, s.dim()))
    inter = torch.sum(s_hat * s, dim=dims)
    denom = torch.sum(s_hat, dim=dims) + torch.sum(s, dim=dims)
    return torch.mean(1.0 - (2.0 * inter + eps) / (denom + eps))


def _img_terms(x_hat, x, s_hat, s, w: LossWeights, perceptual: Optional[PerceptualDistance]):
    _check_same(x_hat, x)
    perceptual = perceptual or get_perceptual(w.distance)
    mse = F.mse_loss(x_hat, x)
    if w.mf > 0:
        mf_term = w.mf * mf_loss(x_hat, x, s_hat, s, w.gamma)
    else:
        mf_term = x_hat.new_zeros(())
    return mse + w.perceptual * perceptual(x_hat, x) + mf_term, mf_term


def img_loss(x_hat: torch.Tensor, x: torch.Tensor, s_hat: Optional[torch.Tensor], s: torch.Tensor,
             w: LossWeights = LossWeights(), perceptual: Optional[PerceptualDistance] = None) -> torch.Tensor:
    return _img_terms(x_hat, x, s_hat, s, w, perceptual)[0]


def seg_loss(s_hat: torch.Tensor, s: torch.Tensor, w: LossWeights = LossWeights()) -> torch.Tensor:
    _check_same(s_hat, s)
    return F.mse_loss(s_hat, s) + w.focal * focal_loss(s_hat, s, w.gamma) + w.dice * dice_loss(s_hat, s, w.dice_smooth)


def loss_breakdown(x_hat: torch.Tensor, x: torch.Tensor, s_hat: torch.Tensor, s: torch.Tensor,
                   w: LossWeights = LossWeights(), perceptual: Optional[PerceptualDistance] = None,
                   use_predicted_mask: bool = True) -> LossBreakdown:
    """
    All loss components of one batch

    Args:
        use_predicted_mask: Weight the edge loss by the misclassification
            map of s_hat; when False only the ground-truth mask is used and
            the image loss sends no gradient into the segmentation branch.
    """
    weight_mask = s_hat if use_predicted_mask else None
    img, mf_term = _img_terms(x_hat, x, weight_mask, s, w, perceptual)
    seg = seg_loss(s_hat, s, w)
    return LossBreakdown(total=img + seg, img=img, seg=seg, mf=mf_term)


def total_loss(x_hat: torch.Tensor, x: torch.Tensor, s_hat: torch.Tensor, s: torch.Tensor,
               w: LossWeights = LossWeights(), perceptual: Optional[PerceptualDistance] = None) -> torch.Tensor:
    return loss_breakdown(x_hat, x, s_hat, s, w, perceptual).total
