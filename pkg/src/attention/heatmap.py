"""
Attention heatmap rendering and export
"""
import json
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import torch
import torch.nn.functional as F
from matplotlib import colormaps

from ..utils.errors import DomainError, ShapeError
from ..utils.imaging import save_png
from ..utils.logger import get_logger
from .text_slice import AttnStack

logger = get_logger()

DEFAULT_COLORMAP = 'jet'
BLEND = 0.5


def normalize_map(attn_map: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant map becomes 0.5 everywhere"""
    arr = np.asarray(attn_map, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Attention map contains non-finite values")
    lo, hi = arr.min(), arr.max()
    if hi - lo <= 0:
        return np.full(arr.shape, 0.5)
    return (arr - lo) / (hi - lo)


def _resize(arr: np.ndarray, size) -> np.ndarray:
    if arr.shape == tuple(size):
        return arr
    t = torch.from_numpy(arr)[None, None]
    return F.interpolate(t, size=tuple(size), mode='bilinear', align_corners=False)[0, 0].numpy()


def export_heatmap(attn_map: Union[np.ndarray, torch.Tensor], underlay: np.ndarray,
                   colormap: str = DEFAULT_COLORMAP) -> np.ndarray:
    """
    Colour overlay of a spatial attention map on an image

    Args:
        attn_map: h x w map
        underlay: H x W x 3 image in [0, 1]
        colormap: Matplotlib colormap name

    Returns:
        H x W x 3 image, 50/50 blend of the coloured map and the underlay
    """
    if isinstance(attn_map, torch.Tensor):
        attn_map = attn_map.detach().cpu().to(torch.float64).numpy()
    attn_map = np.asarray(attn_map)
    if attn_map.ndim != 2:
        raise ShapeError(f"Expected a 2-D attention map, got {attn_map.shape}")
    base = np.asarray(underlay, dtype=np.float64)
    if base.ndim == 2:
        base = np.repeat(base[:, :, None], 3, axis=2)

    heat = _resize(normalize_map(attn_map), base.shape[:2])
    colored = colormaps[colormap](np.clip(heat, 0.0, 1.0))[..., :3]
    return (BLEND * colored + (1.0 - BLEND) * base).astype(np.float32)


def dump_layer_heatmaps(stack: AttnStack, underlay: np.ndarray, out_dir: Union[str, Path],
                        sample: int = 0) -> Path:
    """
    Write one overlay PNG per cross-attention layer plus the aggregated map

    Returns:
        Path of the index.json describing the written files
    """
    out_dir = Path(out_dir)
    if not stack.tex_maps:
        if stack.tex_index is None:
            raise DomainError("Attention stack has no keyword index to search")
        stack.extract(stack.tex_index)

    entries: List[Dict] = []
    for m, (tex_map, dims) in enumerate(zip(stack.tex_maps, stack.spatial_dims)):
        name = f"layer_{m:02d}.png"
        save_png(out_dir / name, export_heatmap(tex_map[sample], underlay))
        entries.append({'layer': m, 'file': name, 'height': dims[0], 'width': dims[1]})

    aggregated_file = None
    if stack.aggregated is not None:
        aggregated_file = "aggregated.png"
        mean_map = stack.aggregated[sample].mean(dim=0)
        save_png(out_dir / aggregated_file, export_heatmap(mean_map, underlay))

    index = {
        'tex_index': stack.tex_index,
        'num_layers': len(stack),
        'layers': entries,
        'aggregated': aggregated_file,
    }
    index_path = out_dir / 'index.json'
    with open(index_path, 'w') as f:
        json.dump(index, f, indent=2)
    logger.info(f"Wrote {len(entries)} layer heatmaps to {out_dir}")
    return index_path
