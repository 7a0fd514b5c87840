"""
Background textures for composition

Procedural backgrounds keep their luminance inside a mid-grey band so that
text tinted toward either extreme always stands out. User images can be
mixed in from a directory; images that already contain glyph-like text are
rejected, since that text would be missing from the mask.
"""
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage

from ..utils.errors import DatasetIOError
from ..utils.imaging import load_png
from ..utils.logger import get_logger

logger = get_logger()

BASE_LUMINANCE = (0.25, 0.75)
TINT = 0.05
GRADIENT = 0.06
NOISE = 0.03
SHAPE_OFFSET = 0.06
IMAGE_SUFFIXES = ('.png', '.jpg', '.jpeg', '.bmp')


def _value_noise(height: int, width: int, cells: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth noise in [-1, 1]: a coarse random grid upsampled with cubic splines"""
    grid = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    smooth = ndimage.zoom(grid, (height / (cells + 1), width / (cells + 1)), order=3, mode='nearest')
    smooth = smooth[:height, :width]
    peak = np.max(np.abs(smooth))
    return smooth / peak if peak > 0 else smooth


def procedural_background(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """Gradient + two octaves of value noise + a few soft shapes, H x W x 3 in [0, 1]"""
    base = rng.uniform(*BASE_LUMINANCE)
    img = np.full((height, width, 3), base, dtype=np.float64)
    img += rng.uniform(-TINT, TINT, size=3)

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    ramp = (xx * np.cos(theta) + yy * np.sin(theta)) / max(height, width)
    img += (rng.uniform(-GRADIENT, GRADIENT) * ramp)[..., None]

    noise = 0.65 * _value_noise(height, width, 4, rng) + 0.35 * _value_noise(height, width, 8, rng)
    img += (NOISE * noise)[..., None]

    for _ in range(int(rng.integers(1, 5))):
        shape = np.zeros((height, width), dtype=np.float64)
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        ry, rx = rng.uniform(0.08, 0.35) * height, rng.uniform(0.08, 0.35) * width
        if rng.random() < 0.5:
            shape[((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0] = 1.0
        else:
            shape[(np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)] = 1.0
        shape = ndimage.gaussian_filter(shape, sigma=1.0)
        img += (rng.uniform(-SHAPE_OFFSET, SHAPE_OFFSET) * shape)[..., None]

    return np.clip(img, 0.0, 1.0).astype(np.float32)


def fit_background(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Center-crop to the target aspect ratio, then resize to height x width"""
    h, w = image.shape[:2]
    target = width / height
    if w / h > target:
        cw = int(round(h * target))
        x0 = (w - cw) // 2
        image = image[:, x0:x0 + cw]
    else:
        ch = int(round(w / target))
        y0 = (h - ch) // 2
        image = image[y0:y0 + ch]
    if image.shape[:2] == (height, width):
        return image.astype(np.float32)
    pil = Image.fromarray(np.round(np.clip(image, 0, 1) * 255).astype(np.uint8))
    pil = pil.resize((width, height), Image.Resampling.BICUBIC)
    return np.asarray(pil, dtype=np.float32) / 255.0


def contains_text(image: np.ndarray, recognizer, ncc_threshold: float = 0.8) -> bool:
    """True if any glyph-like region of the image matches an atlas glyph that well"""
    matches = recognizer.recognize_with_scores(image)
    return any(score >= ncc_threshold for _, score in matches)


def load_backgrounds(directory: Optional[str], size: Tuple[int, int], recognizer=None,
                     ncc_threshold: float = 0.8) -> List[np.ndarray]:
    """
    Read user-supplied backgrounds, fitted to size = (height, width)

    Images in which the recognizer finds a glyph with NCC >= ncc_threshold
    are skipped.
    """
    if not directory:
        return []
    root = Path(directory)
    if not root.is_dir():
        raise DatasetIOError(f"Background directory not found: {root}")

    backgrounds = []
    for path in sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        image = fit_background(load_png(path), *size)
        if recognizer is not None and contains_text(image, recognizer, ncc_threshold):
            logger.warning(f"Rejected background with text-like content: {path.name}")
            continue
        backgrounds.append(image)
    logger.info(f"Loaded {len(backgrounds)} backgrounds from {root}")
    return backgrounds
