"""
Single-pass inference and batch prediction over a dataset split
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import torch
from tqdm import tqdm

from ..attention.heatmap import dump_layer_heatmaps, export_heatmap
from ..attention.text_slice import AttnStack, aggregate_attention
from ..synthesis.dataset import load_triplet, read_manifest, select_split
from ..utils.errors import ShapeError
from ..utils.imaging import quantize, save_png, to_numpy, to_tensor
from ..utils.logger import get_logger
from .checkpoint import load_checkpoint
from .model import TextAwareSR

logger = get_logger()


@dataclass
class InferenceResult:
    x_hat: np.ndarray          # H x W x 3
    s_hat: np.ndarray          # H x W
    attn: AttnStack
    heatmap: Optional[np.ndarray] = None


def keyword_map(stack: AttnStack, target) -> torch.Tensor:
    """Layer-averaged keyword attention of the first sample, resized to target"""
    maps = stack.tex_maps or stack.extract(stack.tex_index)
    uniform = torch.full((1, len(maps)), 1.0 / len(maps), dtype=maps[0].dtype)
    return aggregate_attention(maps, target, uniform)[0, 0]


def _as_model(model_or_checkpoint: Union[TextAwareSR, str, Path]) -> TextAwareSR:
    if isinstance(model_or_checkpoint, TextAwareSR):
        return model_or_checkpoint
    return load_checkpoint(model_or_checkpoint)[0]


@torch.no_grad()
def infer(model_or_checkpoint: Union[TextAwareSR, str, Path], x_L: np.ndarray,
          heatmaps: bool = False) -> InferenceResult:
    """
    encode -> one-step denoise -> joint decode for one low-resolution image

    Args:
        model_or_checkpoint: A model or the path of a checkpoint to load
        x_L: h x w x 3 image in [0, 1]
        heatmaps: Also render the keyword attention over the output
    """
    model = _as_model(model_or_checkpoint)
    model.eval()
    x = np.asarray(x_L, dtype=np.float32)
    if x.ndim != 3 or x.shape[-1] != 3:
        raise ShapeError(f"Expected h x w x 3 image, got {x.shape}")

    out = model(to_tensor(x))
    x_hat = to_numpy(out.x_hat)
    s_hat = to_numpy(out.s_hat)[..., 0]
    heat = None
    if heatmaps:
        heat = export_heatmap(keyword_map(out.attn, x_hat.shape[:2]), x_hat)
    return InferenceResult(x_hat=x_hat, s_hat=s_hat, attn=out.attn, heatmap=heat)


def predict_split(model_or_checkpoint: Union[TextAwareSR, str, Path], data_root: Union[str, Path],
                  out_dir: Union[str, Path], split: Optional[str] = 'test', heatmaps: bool = False,
                  progress: bool = True) -> Path:
    """Write sr/, mask/ (and heatmap/) PNGs named after the manifest ids; returns out_dir"""
    model = _as_model(model_or_checkpoint)
    out_dir = Path(out_dir)
    entries = select_split(read_manifest(data_root), split)
    for entry in tqdm(entries, desc='infer', disable=not progress):
        triplet = load_triplet(data_root, entry)
        result = infer(model, triplet.x_L, heatmaps=heatmaps)
        save_png(out_dir / 'sr' / f"{entry['id']}.png", quantize(result.x_hat))
        save_png(out_dir / 'mask' / f"{entry['id']}.png", result.s_hat)
        if result.heatmap is not None:
            save_png(out_dir / 'heatmap' / f"{entry['id']}.png", result.heatmap)
    logger.info(f"Wrote predictions for {len(entries)} samples to {out_dir}")
    return out_dir


@torch.no_grad()
def attention_dump(model_or_checkpoint: Union[TextAwareSR, str, Path], x_L: np.ndarray,
                   out_dir: Union[str, Path]) -> Path:
    """Per-layer keyword heatmaps over the super-resolved image; returns index.json"""
    result = infer(model_or_checkpoint, x_L)
    return dump_layer_heatmaps(result.attn, result.x_hat, out_dir)
