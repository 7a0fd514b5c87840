"""
Procedural glyph atlas and stroke rasterizer

Glyphs are polylines on a box that is `width` wide and 1 tall (y grows
downward). Strokes are drawn with Pillow on a 4x supersampled canvas and
box-filtered back down, which gives a soft alpha channel; the binary mask of
a patch is exactly alpha > 0.5.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from ..utils.errors import ParameterError
from ..utils.logger import get_logger

logger = get_logger()

SUPERSAMPLE = 4
MASK_THRESHOLD = 0.5

Polyline = List[Tuple[float, float]]


def _arc(cx: float, cy: float, rx: float, ry: float, start: float, end: float, steps: int = 16) -> Polyline:
    """Points on an elliptical arc, angles in degrees, counter-clockwise on screen"""
    angles = np.linspace(math.radians(start), math.radians(end), steps)
    return [(cx + rx * math.cos(a), cy - ry * math.sin(a)) for a in angles]


@dataclass(frozen=True)
class Glyph:
    char: str
    width: float
    strokes: Tuple[Tuple[Tuple[float, float], ...], ...]


def _glyph(char: str, width: float, *strokes: Polyline) -> Glyph:
    return Glyph(char, width, tuple(tuple(s) for s in strokes))


_P_BOWL = [(0.0, 0.0), (0.6, 0.0)] + _arc(0.6, 0.275, 0.4, 0.275, 90, -90) + [(0.0, 0.55)]

ATLAS: Dict[str, Glyph] = {g.char: g for g in (
    _glyph('A', 0.8, [(0.0, 1.0), (0.5, 0.0), (1.0, 1.0)], [(0.22, 0.62), (0.78, 0.62)]),
    _glyph('C', 0.8, _arc(0.5, 0.5, 0.5, 0.5, 45, 315)),
    _glyph('E', 0.65, [(1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)], [(0.0, 0.5), (0.8, 0.5)]),
    _glyph('F', 0.6, [(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)], [(0.0, 0.5), (0.8, 0.5)]),
    _glyph('H', 0.75, [(0.0, 0.0), (0.0, 1.0)], [(1.0, 0.0), (1.0, 1.0)], [(0.0, 0.5), (1.0, 0.5)]),
    _glyph('K', 0.7, [(0.0, 0.0), (0.0, 1.0)], [(1.0, 0.0), (0.0, 0.6)], [(0.3, 0.4), (1.0, 1.0)]),
    _glyph('L', 0.55, [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]),
    _glyph('M', 0.9, [(0.0, 1.0), (0.0, 0.0), (0.5, 0.6), (1.0, 0.0), (1.0, 1.0)]),
    _glyph('N', 0.75, [(0.0, 1.0), (0.0, 0.0), (1.0, 1.0), (1.0, 0.0)]),
    _glyph('O', 0.85, _arc(0.5, 0.5, 0.5, 0.5, 0, 360, steps=24)),
    _glyph('P', 0.65, [(0.0, 1.0)] + _P_BOWL),
    _glyph('R', 0.7, [(0.0, 1.0)] + _P_BOWL, [(0.45, 0.55), (1.0, 1.0)]),
    _glyph('T', 0.75, [(0.0, 0.0), (1.0, 0.0)], [(0.5, 0.0), (0.5, 1.0)]),
    _glyph('U', 0.75, [(0.0, 0.0), (0.0, 0.6)] + _arc(0.5, 0.6, 0.5, 0.4, 180, 360) + [(1.0, 0.0)]),
    _glyph('V', 0.8, [(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]),
    _glyph('X', 0.75, [(0.0, 0.0), (1.0, 1.0)], [(1.0, 0.0), (0.0, 1.0)]),
    _glyph('Y', 0.8, [(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)], [(0.5, 0.5), (0.5, 1.0)]),
    _glyph('Z', 0.7, [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]),
    _glyph('J', 0.6, [(1.0, 0.0), (1.0, 0.7)] + _arc(0.5, 0.7, 0.5, 0.3, 0, -180)),
    _glyph('W', 1.0, [(0.0, 0.0), (0.25, 1.0), (0.5, 0.35), (0.75, 1.0), (1.0, 0.0)]),
    _glyph('4', 0.7, [(0.7, 1.0), (0.7, 0.0), (0.0, 0.7), (1.0, 0.7)]),
    _glyph('7', 0.65, [(0.0, 0.0), (1.0, 0.0), (0.35, 1.0)]),
)}

DEFAULT_CHARSET = ''.join(ATLAS)


@dataclass(frozen=True)
class GlyphStyle:
    """Randomization ranges for rendered patches; sizes in pixels or fractions of glyph height"""
    min_glyphs: int = 1
    max_glyphs: int = 8
    glyph_height: Tuple[int, int] = (16, 28)
    thickness: Tuple[float, float] = (0.14, 0.20)
    gap: Tuple[float, float] = (0.35, 0.6)
    max_rotation: float = 5.0
    margin: float = 0.2
    vertical_prob: float = 0.2

    def __post_init__(self):
        if not 1 <= self.min_glyphs <= self.max_glyphs:
            raise ParameterError(f"Need 1 <= min_glyphs <= max_glyphs, got {self.min_glyphs}, {self.max_glyphs}")
        if self.glyph_height[0] < 1 or self.glyph_height[0] > self.glyph_height[1]:
            raise ParameterError(f"Invalid glyph height range {self.glyph_height}")
        if self.thickness[0] <= 0 or self.thickness[0] > self.thickness[1] or self.thickness[1] >= 0.5:
            raise ParameterError(f"Stroke thickness range {self.thickness} must lie in (0, 0.5)")
        if self.gap[0] < 0 or self.gap[0] > self.gap[1]:
            raise ParameterError(f"Invalid gap range {self.gap}")
        if not 0.0 <= self.vertical_prob <= 1.0:
            raise ParameterError("vertical_prob must be a probability")
        if self.max_rotation < 0 or self.margin < 0:
            raise ParameterError("max_rotation and margin must be non-negative")

    @classmethod
    def from_config(cls, config: Dict = None) -> 'GlyphStyle':
        config = config or {}
        return cls(
            min_glyphs=int(config.get('min_glyphs', cls.min_glyphs)),
            max_glyphs=int(config.get('max_glyphs', cls.max_glyphs)),
            glyph_height=tuple(int(v) for v in config.get('glyph_height', cls.glyph_height)),
            thickness=tuple(float(v) for v in config.get('thickness', cls.thickness)),
            gap=tuple(float(v) for v in config.get('gap', cls.gap)),
            max_rotation=float(config.get('max_rotation', cls.max_rotation)),
            margin=float(config.get('margin', cls.margin)),
            vertical_prob=float(config.get('vertical_prob', cls.vertical_prob)),
        )


@dataclass
class GlyphPatch:
    """
    A rendered text patch

    rgba holds the flat text colour and the soft alpha; box is filled in
    (x, y, w, h) target coordinates once the patch is placed.
    """
    rgba: np.ndarray
    mask: np.ndarray
    transcript: str
    glyph_height: float
    vertical: bool = False
    box: Optional[Tuple[int, int, int, int]] = None
    color: Tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    @property
    def alpha(self) -> np.ndarray:
        return self.rgba[..., 3]

    @property
    def height(self) -> int:
        return int(self.rgba.shape[0])

    @property
    def width(self) -> int:
        return int(self.rgba.shape[1])


def glyph_extent(glyph: Glyph, height: float, thickness: float) -> float:
    """Ink width in pixels of a glyph drawn `height` pixels tall"""
    return glyph.width * (height - thickness) + thickness


def place_strokes(glyph: Glyph, x0: float, y0: float, height: float, thickness: float,
                  angle: float = 0.0) -> List[Polyline]:
    """Glyph strokes in pixel coordinates with the ink box's top-left at (x0, y0)"""
    inner = height - thickness
    width = glyph_extent(glyph, height, thickness)
    cx, cy = x0 + width / 2.0, y0 + height / 2.0
    cos_a, sin_a = math.cos(math.radians(angle)), math.sin(math.radians(angle))

    placed = []
    for stroke in glyph.strokes:
        points = []
        for u, v in stroke:
            px = x0 + thickness / 2.0 + u * glyph.width * inner - cx
            py = y0 + thickness / 2.0 + v * inner - cy
            points.append((cx + px * cos_a - py * sin_a, cy + px * sin_a + py * cos_a))
        placed.append(points)
    return placed


def rasterize(strokes: Sequence[Polyline], height: int, width: int, thickness: float,
              supersample: int = SUPERSAMPLE) -> np.ndarray:
    """Soft alpha in [0, 1] of round-jointed strokes on a height x width canvas"""
    if height < 1 or width < 1 or thickness <= 0:
        raise ParameterError(f"Cannot rasterize into {height}x{width} with thickness {thickness}")
    s = supersample
    canvas = Image.new('L', (width * s, height * s), 0)
    draw = ImageDraw.Draw(canvas)
    line_width = max(1, int(round(thickness * s)))
    radius = line_width / 2.0
    for stroke in strokes:
        pts = [(x * s, y * s) for x, y in stroke]
        if len(pts) > 1:
            draw.line(pts, fill=255, width=line_width)
        for x, y in pts:
            draw.ellipse([x - radius, y - radius, x + radius, y + radius], fill=255)

    hi = np.asarray(canvas, dtype=np.float64) / 255.0
    return hi.reshape(height, s, width, s).mean(axis=(1, 3))


def render_glyph(char: str, height: int, thickness_frac: float, angle: float = 0.0,
                 margin: int = 2) -> np.ndarray:
    """Alpha of a single glyph, ink `height` pixels tall, with a blank border"""
    try:
        glyph = ATLAS[char]
    except KeyError:
        raise ParameterError(f"Glyph '{char}' not in atlas") from None
    thickness = thickness_frac * height
    width = glyph_extent(glyph, height, thickness)
    strokes = place_strokes(glyph, margin, margin, height, thickness, angle)
    return rasterize(strokes, int(math.ceil(height)) + 2 * margin, int(math.ceil(width)) + 2 * margin, thickness)


def render_glyph_patch(seed: int, charset: str = DEFAULT_CHARSET, style: GlyphStyle = GlyphStyle()) -> GlyphPatch:
    """
    Render a random string of atlas glyphs as one patch

    Args:
        seed: Sole source of randomness
        charset: Characters to draw from, all must be in the atlas
        style: Size, stroke and layout ranges

    Returns:
        GlyphPatch with mask == alpha > 0.5
    """
    if not charset:
        raise ParameterError("charset must not be empty")
    unknown = sorted(set(charset) - set(ATLAS))
    if unknown:
        raise ParameterError(f"Characters without atlas glyphs: {unknown}")

    rng = np.random.default_rng(seed)
    n = int(rng.integers(style.min_glyphs, style.max_glyphs + 1))
    chars = list(charset)
    transcript = ''.join(chars[int(i)] for i in rng.integers(0, len(chars), size=n))
    height = float(rng.integers(style.glyph_height[0], style.glyph_height[1] + 1))
    thickness = float(rng.uniform(*style.thickness)) * height
    vertical = bool(rng.random() < style.vertical_prob)
    color = tuple(float(c) for c in rng.uniform(0.0, 1.0, size=3))
    angles = rng.uniform(-style.max_rotation, style.max_rotation, size=n)
    gaps = rng.uniform(*style.gap, size=max(n - 1, 0)) * height
    margin = max(2.0, style.margin * height)

    glyphs = [ATLAS[c] for c in transcript]
    widths = [glyph_extent(g, height, thickness) for g in glyphs]
    strokes: List[Polyline] = []
    if vertical:
        column = max(widths)
        canvas_w = column + 2 * margin
        canvas_h = n * height + float(np.sum(gaps)) + 2 * margin
        y = margin
        for i, (g, w) in enumerate(zip(glyphs, widths)):
            strokes += place_strokes(g, margin + (column - w) / 2.0, y, height, thickness, angles[i])
            y += height + (gaps[i] if i < n - 1 else 0.0)
    else:
        canvas_w = float(np.sum(widths)) + float(np.sum(gaps)) + 2 * margin
        canvas_h = height + 2 * margin
        x = margin
        for i, (g, w) in enumerate(zip(glyphs, widths)):
            strokes += place_strokes(g, x, margin, height, thickness, angles[i])
            x += w + (gaps[i] if i < n - 1 else 0.0)

    alpha = rasterize(strokes, int(math.ceil(canvas_h)), int(math.ceil(canvas_w)), thickness)
    rgba = np.empty(alpha.shape + (4,), dtype=np.float32)
    rgba[..., :3] = np.asarray(color, dtype=np.float32)
    rgba[..., 3] = alpha
    mask = rgba[..., 3] > MASK_THRESHOLD
    logger.debug(f"Rendered patch '{transcript}' {alpha.shape[1]}x{alpha.shape[0]} vertical={vertical}")
    return GlyphPatch(rgba=rgba, mask=mask, transcript=transcript, glyph_height=height,
                      vertical=vertical, color=color)


def filter_patch(p: GlyphPatch, min_ratio: float = 12.0) -> bool:
    """Keep patches whose long edge offers at least min_ratio pixels per character"""
    if not p.transcript:
        raise ParameterError("Patch has an empty transcript")
    return max(p.width, p.height) / len(p.transcript) >= min_ratio
