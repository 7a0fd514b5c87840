"""
Paste glyph patches onto a background and build the exact text mask
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from ..utils.errors import ParameterError, ShapeError
from ..utils.imaging import luminance
from ..utils.logger import get_logger
from .glyphs import MASK_THRESHOLD, GlyphPatch

logger = get_logger()

MAX_PLACEMENT_ATTEMPTS = 100
DARK_TEXT = 0.04
LIGHT_TEXT = 0.96

Box = Tuple[int, int, int, int]


@dataclass(frozen=True)
class ComposeOptions:
    scale_range: Tuple[float, float] = (0.10, 0.40)
    min_glyph_px: float = 12.0
    min_contrast: float = 0.4
    no_overlap: bool = True

    @classmethod
    def from_config(cls, config: Dict = None) -> 'ComposeOptions':
        config = config or {}
        return cls(
            scale_range=tuple(float(v) for v in config.get('patch_scale', cls.scale_range)),
            min_glyph_px=float(config.get('min_glyph_px', cls.min_glyph_px)),
            min_contrast=float(config.get('min_contrast', cls.min_contrast)),
            no_overlap=bool(config.get('no_overlap', cls.no_overlap)),
        )


def boxes_overlap(a: Box, b: Box) -> bool:
    """Positive-area intersection of two (x, y, w, h) boxes"""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return min(ax + aw, bx + bw) > max(ax, bx) and min(ay + ah, by + bh) > max(ay, by)


def resize_alpha(alpha: np.ndarray, height: int, width: int) -> np.ndarray:
    """Area-aware bilinear resize of a soft alpha map"""
    if alpha.shape == (height, width):
        return alpha.astype(np.float32)
    pil = Image.fromarray(alpha.astype(np.float32))
    resized = pil.resize((width, height), Image.Resampling.BILINEAR)
    return np.clip(np.asarray(resized, dtype=np.float32), 0.0, 1.0)


def _scaled_size(patch: GlyphPatch, k: float) -> Tuple[int, int]:
    return max(1, int(round(patch.height * k))), max(1, int(round(patch.width * k)))


def _scale_bounds(patch: GlyphPatch, bg_h: int, bg_w: int, opts: ComposeOptions) -> Tuple[float, float]:
    """(legibility floor, largest scale that fits) for one patch"""
    floor = opts.min_glyph_px / patch.glyph_height
    fit = min(bg_h / patch.height, bg_w / patch.width)
    return floor, fit


def fits_background(patch: GlyphPatch, bg_h: int, bg_w: int, options: ComposeOptions = ComposeOptions()) -> bool:
    """True if the patch fits the background at its legibility floor scale"""
    floor, fit = _scale_bounds(patch, bg_h, bg_w, options)
    return floor <= fit


def _text_color(color: Sequence[float], local_luma: float, min_contrast: float) -> np.ndarray:
    """Keep the patch colour unless it is too close to the background; then use the far extreme"""
    rgb = np.asarray(color, dtype=np.float64)
    if abs(float(luminance(rgb[None, None, :])[0, 0]) - local_luma) >= min_contrast:
        return rgb
    value = DARK_TEXT if local_luma > 0.5 else LIGHT_TEXT
    return np.full(3, value)


def compose_sample(background: np.ndarray, patches: Sequence[GlyphPatch], seed: int,
                   no_overlap: bool = True, options: ComposeOptions = ComposeOptions(),
                   placements: Optional[List[Dict]] = None) -> Tuple[np.ndarray, np.ndarray, Dict]:
    """
    Alpha-blend patches into the background at seeded positions

    Args:
        background: H x W x 3 image in [0, 1]
        patches: Rendered patches, placed in order
        seed: Position / scale randomness
        no_overlap: Reject positions whose box intersects an earlier box
        options: Scale, contrast and legibility limits
        placements: Exact placements to reproduce (from a previous call's
            metadata); when given, seed and overlap sampling are not used

    Returns:
        (x_H, s, metadata) with s in {0, 1} and metadata holding boxes,
        transcripts and placements of the patches that were pasted, plus
        'alpha', the per-pixel maximum of their resized alphas
    """
    bg = np.asarray(background, dtype=np.float32)
    if bg.ndim != 3 or bg.shape[-1] != 3:
        raise ShapeError(f"Background must be H x W x 3, got {bg.shape}")
    bg_h, bg_w = bg.shape[:2]
    x_H = bg.copy()
    s = np.zeros((bg_h, bg_w), dtype=np.float32)
    coverage = np.zeros((bg_h, bg_w), dtype=np.float32)
    metadata = {'boxes': [], 'transcripts': [], 'vertical': [], 'placements': [], 'alpha': coverage}
    if not patches:
        return x_H, s, metadata

    smallest = min(
        (_scaled_size(p, _scale_bounds(p, bg_h, bg_w, options)[0]) for p in patches),
        key=lambda hw: hw[0] * hw[1],
    )
    if smallest[0] > bg_h or smallest[1] > bg_w:
        raise ParameterError(
            f"Background {bg_w}x{bg_h} is smaller than the smallest patch {smallest[1]}x{smallest[0]}")

    rng = np.random.default_rng(seed)
    if placements is None:
        placements = _sample_placements(patches, bg_h, bg_w, rng, no_overlap, options)

    for place in placements:
        patch = patches[place['patch']]
        x, y, h, w = place['x'], place['y'], place['height'], place['width']
        alpha = resize_alpha(patch.alpha, h, w)
        region = x_H[y:y + h, x:x + w]
        local_luma = float(luminance(region).mean())
        color = _text_color(place.get('color', patch.color), local_luma, options.min_contrast)
        a = alpha[..., None]
        x_H[y:y + h, x:x + w] = (a * color + (1.0 - a) * region).astype(np.float32)
        s[y:y + h, x:x + w] = np.maximum(s[y:y + h, x:x + w], (alpha > MASK_THRESHOLD).astype(np.float32))
        coverage[y:y + h, x:x + w] = np.maximum(coverage[y:y + h, x:x + w], alpha)

        box = (int(x), int(y), int(w), int(h))
        patch.box = box
        metadata['boxes'].append(list(box))
        metadata['transcripts'].append(patch.transcript)
        metadata['vertical'].append(bool(patch.vertical))
        metadata['placements'].append({**place, 'color': [float(c) for c in color]})

    return np.clip(x_H, 0.0, 1.0), s, metadata


def _sample_placements(patches: Sequence[GlyphPatch], bg_h: int, bg_w: int, rng: np.random.Generator,
                       no_overlap: bool, options: ComposeOptions) -> List[Dict]:
    short_edge = min(bg_h, bg_w)
    placed: List[Dict] = []
    boxes: List[Box] = []
    for i, patch in enumerate(patches):
        floor, fit = _scale_bounds(patch, bg_h, bg_w, options)
        cross = patch.width if patch.vertical else patch.height
        k = rng.uniform(*options.scale_range) * short_edge / cross
        if floor > fit:
            logger.warning(f"Patch '{patch.transcript}' cannot fit at a legible size, skipped")
            continue
        k = float(np.clip(k, floor, fit))
        h, w = _scaled_size(patch, k)
        h, w = min(h, bg_h), min(w, bg_w)

        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            y = int(rng.integers(0, bg_h - h + 1))
            x = int(rng.integers(0, bg_w - w + 1))
            box = (x, y, w, h)
            if not no_overlap or not any(boxes_overlap(box, b) for b in boxes):
                break
        else:
            logger.warning(f"No free position for patch '{patch.transcript}' after "
                           f"{MAX_PLACEMENT_ATTEMPTS} attempts, skipped")
            continue

        boxes.append(box)
        placed.append({'patch': i, 'x': x, 'y': y, 'height': h, 'width': w, 'scale': k,
                       'color': list(patch.color)})
    return placed
