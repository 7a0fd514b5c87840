"""
Image and mask quality metrics on float images in [0, 1]
"""
import numpy as np
from scipy.ndimage import uniform_filter
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio

from ..utils.errors import ShapeError
from ..utils.imaging import luminance

PSNR_CAP = 99.0
SSIM_WINDOW = 8  # even, so skimage structural_similarity (odd win_size only) is not usable
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _same_shape(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"Image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB for unit-range images, capped at 99 dB (zero error included)"""
    a, b = _same_shape(a, b)
    if mean_squared_error(a, b) == 0:
        return PSNR_CAP
    return float(min(peak_signal_noise_ratio(a, b, data_range=1.0), PSNR_CAP))


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW, k: float = 1.0) -> float:
    """
    Single-scale SSIM of the BT.601 luminance, uniform window

    C1 = 1e-4 * k and C2 = 9e-4 * k, k being the squared data range.
    """
    a, b = _same_shape(a, b)
    x, y = luminance(a), luminance(b)
    c1 = (SSIM_K1 ** 2) * k
    c2 = (SSIM_K2 ** 2) * k

    mu_x = uniform_filter(x, size=window)
    mu_y = uniform_filter(y, size=window)
    var_x = uniform_filter(x * x, size=window) - mu_x * mu_x
    var_y = uniform_filter(y * y, size=window) - mu_y * mu_y
    cov = uniform_filter(x * y, size=window) - mu_x * mu_y

    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))


def _binarize(s_hat: np.ndarray, s: np.ndarray, threshold: float):
    s_hat, s = _same_shape(np.squeeze(s_hat), np.squeeze(s))
    return s_hat > threshold, s > threshold


def iou(s_hat: np.ndarray, s: np.ndarray, threshold: float = 0.5) -> float:
    """Intersection over union of the thresholded masks; two empty masks score 1"""
    p, g = _binarize(s_hat, s, threshold)
    union = np.logical_or(p, g).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(p, g).sum() / union)


def dice_coef(s_hat: np.ndarray, s: np.ndarray, threshold: float = 0.5) -> float:
    """2|A n B| / (|A| + |B|) of the thresholded masks; two empty masks score 1"""
    p, g = _binarize(s_hat, s, threshold)
    total = p.sum() + g.sum()
    if total == 0:
        return 1.0
    return float(2.0 * np.logical_and(p, g).sum() / total)
