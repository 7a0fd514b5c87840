"""
Single-stage degradation chain: blur -> downsample -> noise -> JPEG-like quantization

Every random draw comes from one generator seeded by the caller, so the
low-resolution image is a pure function of (x_H, config, seed).
"""
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from PIL import Image
from scipy import fft, ndimage

from ..utils.errors import ParameterError, ShapeError

RESAMPLE_KERNELS = {
    'bicubic': Image.Resampling.BICUBIC,
    'bilinear': Image.Resampling.BILINEAR,
    'nearest': Image.Resampling.NEAREST,
}

# IJG base quantization tables (quality 50)
LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)

CHROMA_TABLE = np.array([
    [17, 18, 24, 47, 99, 99, 99, 99],
    [18, 21, 26, 66, 99, 99, 99, 99],
    [24, 26, 56, 99, 99, 99, 99, 99],
    [47, 66, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
    [99, 99, 99, 99, 99, 99, 99, 99],
], dtype=np.float64)

BLOCK = 8


@dataclass(frozen=True)
class DegradeConfig:
    blur_sigma: Tuple[float, float] = (0.2, 1.5)
    kernels: Tuple[str, ...] = ('bicubic', 'bilinear', 'nearest')
    noise_sigma: Tuple[float, float] = (0.0, 0.03)
    jpeg_quality: Tuple[int, int] = (40, 95)
    scale: int = 4

    def __post_init__(self):
        for name in ('blur_sigma', 'noise_sigma'):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise ParameterError(f"Invalid {name} range ({lo}, {hi})")
        lo, hi = self.jpeg_quality
        if not 1 <= lo <= hi <= 100:
            raise ParameterError(f"JPEG quality range must lie in [1, 100], got ({lo}, {hi})")
        if not self.kernels or any(k not in RESAMPLE_KERNELS for k in self.kernels):
            raise ParameterError(f"Resample kernels must be drawn from {sorted(RESAMPLE_KERNELS)}")
        if self.scale < 1:
            raise ParameterError("scale must be >= 1")

    @classmethod
    def from_config(cls, config: Dict = None) -> 'DegradeConfig':
        config = config or {}
        return cls(
            blur_sigma=tuple(float(v) for v in config.get('blur_sigma', cls.blur_sigma)),
            kernels=tuple(config.get('kernels', cls.kernels)),
            noise_sigma=tuple(float(v) for v in config.get('noise_sigma', cls.noise_sigma)),
            jpeg_quality=tuple(int(v) for v in config.get('jpeg_quality', cls.jpeg_quality)),
            scale=int(config.get('scale', cls.scale)),
        )


def quality_table(base: np.ndarray, quality: int) -> np.ndarray:
    """IJG quality scaling of a base table"""
    quality = int(np.clip(quality, 1, 100))
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.floor((base * scale + 50.0) / 100.0), 1.0, 255.0)


def _rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return np.stack([y, cb, cr], axis=-1)


def _ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    y, cb, cr = ycc[..., 0], ycc[..., 1] - 128.0, ycc[..., 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


def _quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    ph, pw = -h % BLOCK, -w % BLOCK
    padded = np.pad(plane - 128.0, ((0, ph), (0, pw)), mode='edge')
    bh, bw = padded.shape[0] // BLOCK, padded.shape[1] // BLOCK
    blocks = padded.reshape(bh, BLOCK, bw, BLOCK).transpose(0, 2, 1, 3)
    coeffs = fft.dctn(blocks, type=2, axes=(2, 3), norm='ortho')
    coeffs = np.round(coeffs / table) * table
    restored = fft.idctn(coeffs, type=2, axes=(2, 3), norm='ortho')
    restored = restored.transpose(0, 2, 1, 3).reshape(padded.shape)
    return restored[:h, :w] + 128.0


def jpeg_like(image: np.ndarray, quality: int) -> np.ndarray:
    """8x8 block DCT quantization in YCbCr with IJG tables, no chroma subsampling"""
    ycc = _rgb_to_ycbcr(np.asarray(image, dtype=np.float64) * 255.0)
    tables = (quality_table(LUMA_TABLE, quality),
              quality_table(CHROMA_TABLE, quality),
              quality_table(CHROMA_TABLE, quality))
    out = np.stack([_quantize_plane(ycc[..., c], tables[c]) for c in range(3)], axis=-1)
    return np.clip(_ycbcr_to_rgb(out) / 255.0, 0.0, 1.0)


def resize_image(image: np.ndarray, height: int, width: int, kernel: str = 'bicubic') -> np.ndarray:
    """Per-channel float resize with a Pillow kernel"""
    resample = RESAMPLE_KERNELS[kernel]
    channels = [
        np.asarray(Image.fromarray(np.ascontiguousarray(image[..., c], dtype=np.float32))
                   .resize((width, height), resample), dtype=np.float64)
        for c in range(image.shape[-1])
    ]
    return np.stack(channels, axis=-1)


def sample_params(cfg: DegradeConfig, rng: np.random.Generator) -> Dict:
    """Draw every random quantity of the chain up front"""
    return {
        'blur_sigma': float(rng.uniform(*cfg.blur_sigma)),
        'kernel': str(cfg.kernels[int(rng.integers(0, len(cfg.kernels)))]),
        'noise_sigma': float(rng.uniform(*cfg.noise_sigma)),
        'jpeg_quality': int(rng.integers(cfg.jpeg_quality[0], cfg.jpeg_quality[1] + 1)),
        'scale': int(cfg.scale),
    }


def apply_degradation(x_H: np.ndarray, params: Dict, rng: np.random.Generator) -> np.ndarray:
    img = np.asarray(x_H, dtype=np.float64)
    if img.ndim != 3:
        raise ShapeError(f"Expected H x W x C image, got {img.shape}")
    h, w = img.shape[:2]
    scale = params['scale']
    if h % scale or w % scale:
        raise ShapeError(f"Image size {h}x{w} not divisible by scale {scale}")

    if params['blur_sigma'] > 0:
        img = ndimage.gaussian_filter(img, sigma=(params['blur_sigma'], params['blur_sigma'], 0), mode='reflect')
    img = np.clip(resize_image(img, h // scale, w // scale, params['kernel']), 0.0, 1.0)
    if params['noise_sigma'] > 0:
        img = np.clip(img + rng.normal(0.0, params['noise_sigma'], size=img.shape), 0.0, 1.0)
    # quality 100 disables the stage
    if params['jpeg_quality'] < 100:
        img = jpeg_like(img, params['jpeg_quality'])
    return img.astype(np.float32)


def degrade_with_params(x_H: np.ndarray, cfg: DegradeConfig = DegradeConfig(),
                        seed: int = 0) -> Tuple[np.ndarray, Dict]:
    """(x_L, the drawn parameters); x_L is H/scale x W/scale x 3 in [0, 1]"""
    rng = np.random.default_rng(seed)
    params = sample_params(cfg, rng)
    return apply_degradation(x_H, params, rng), params


def degrade(x_H: np.ndarray, cfg: DegradeConfig = DegradeConfig(), seed: int = 0) -> np.ndarray:
    return degrade_with_params(x_H, cfg, seed)[0]
