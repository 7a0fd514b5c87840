"""
Image conversion and PNG I/O helpers

Images travel between modules as float32 H x W x C numpy arrays in [0, 1];
models work on torch B x C x H x W tensors.
"""
from pathlib import Path
from typing import Union

import numpy as np
import torch
from PIL import Image

from .errors import DatasetIOError, ShapeError

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def to_tensor(image: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """H x W x C (or H x W) array -> 1 x C x H x W tensor"""
    arr = np.asarray(image)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ShapeError(f"Expected H x W x C image, got shape {arr.shape}")
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1))).to(dtype).unsqueeze(0)


def to_numpy(tensor: torch.Tensor) -> np.ndarray:
    """1 x C x H x W (or C x H x W) tensor -> H x W x C float32 array"""
    t = tensor.detach().cpu()
    if t.dim() == 4:
        if t.shape[0] != 1:
            raise ShapeError(f"Expected a single image, got batch of {t.shape[0]}")
        t = t[0]
    if t.dim() != 3:
        raise ShapeError(f"Expected C x H x W tensor, got shape {tuple(t.shape)}")
    return t.permute(1, 2, 0).numpy().astype(np.float32)


def luminance(image: np.ndarray) -> np.ndarray:
    """Grayscale conversion with BT.601 weights; 2-D inputs pass through"""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.shape[-1] == 1:
        return arr[..., 0]
    return arr[..., :3] @ LUMA_WEIGHTS


def quantize(image: np.ndarray) -> np.ndarray:
    """Round to the 8-bit grid a PNG round trip would produce"""
    return (np.round(np.clip(image, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def save_png(path: Union[str, Path], image: np.ndarray) -> Path:
    """Write an RGB (H x W x 3) or grayscale (H x W / H x W x 1) image as 8-bit PNG"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"Cannot create directory {path.parent}: {exc}") from exc

    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[-1] == 1:
        arr = arr[..., 0]
    data = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        Image.fromarray(data).save(path, format='PNG')
    except OSError as exc:
        raise DatasetIOError(f"Cannot write {path}: {exc}") from exc
    return path


def load_png(path: Union[str, Path], grayscale: bool = False) -> np.ndarray:
    """Read an image file into a float32 array in [0, 1]"""
    path = Path(path)
    if not path.exists():
        raise DatasetIOError(f"Image not found: {path}")
    with Image.open(path) as img:
        img = img.convert('L' if grayscale else 'RGB')
        data = np.asarray(img, dtype=np.float32) / 255.0
    return data
