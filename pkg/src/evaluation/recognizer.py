"""
Deterministic template recognizer for atlas glyphs

Foreground is whatever departs from the region's median luminance. Connected
components are grouped into glyphs along the reading direction, and each
group is matched by normalized cross-correlation against atlas templates
rendered at the group's height over a sweep of stroke thicknesses.
"""
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image
from scipy import ndimage
from skimage.filters import threshold_otsu

from ..synthesis.glyphs import ATLAS, MASK_THRESHOLD, render_glyph
from ..utils.imaging import luminance

CANVAS = 24
THICKNESS_SWEEP = (0.10, 0.13, 0.16, 0.20)
MIN_DEVIATION = 0.2
MIN_COMPONENT_FRACTION = 0.05
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def to_canvas(patch: np.ndarray, size: int = CANVAS) -> np.ndarray:
    """Scale the longer side to `size` keeping aspect ratio, centered on a zero canvas"""
    h, w = patch.shape
    scale = size / max(h, w)
    nh, nw = max(1, int(round(h * scale))), max(1, int(round(w * scale)))
    resized = Image.fromarray(patch.astype(np.float32)).resize((nw, nh), Image.Resampling.BILINEAR)
    canvas = np.zeros((size, size), dtype=np.float64)
    y0, x0 = (size - nh) // 2, (size - nw) // 2
    canvas[y0:y0 + nh, x0:x0 + nw] = np.asarray(resized, dtype=np.float64)
    return canvas


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-mean normalized cross-correlation in [-1, 1]; 0 for flat inputs"""
    a = a.ravel() - a.mean()
    b = b.ravel() - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom <= 0:
        return 0.0
    return float(np.dot(a, b) / denom)


@lru_cache(maxsize=4096)
def glyph_template(char: str, height: int, thickness: float) -> np.ndarray:
    """Atlas glyph rendered `height` px tall, cropped to its mask and put on the canvas"""
    alpha = render_glyph(char, height, thickness)
    ys, xs = np.nonzero(alpha > MASK_THRESHOLD)
    if ys.size == 0:
        return to_canvas(alpha)
    crop = alpha[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
    template = to_canvas(crop)
    template.setflags(write=False)
    return template


class TemplateRecognizer:
    """
    Reads atlas glyph strings from an image region

    Args:
        charset: Glyphs to consider, defaults to the whole atlas
        thicknesses: Stroke thickness fractions swept per template
        min_deviation: Regions whose strongest departure from the median
            luminance is below this are treated as blank
    """

    def __init__(self, charset: Optional[str] = None, thicknesses: Sequence[float] = THICKNESS_SWEEP,
                 min_deviation: float = MIN_DEVIATION):
        self.charset = charset or ''.join(ATLAS)
        self.thicknesses = tuple(thicknesses)
        self.min_deviation = min_deviation

    def foreground(self, region: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(deviation map, binary foreground)"""
        lum = luminance(region)
        dev = np.abs(lum - np.median(lum))
        peak = float(dev.max()) if dev.size else 0.0
        if peak < self.min_deviation:
            return dev, np.zeros(dev.shape, dtype=bool)
        threshold = max(float(threshold_otsu(dev)), 0.5 * peak)
        return dev, dev > threshold

    def segment(self, fg: np.ndarray) -> Tuple[np.ndarray, List[List[int]], bool]:
        """
        Label components and group them into glyphs

        Returns:
            (label image, groups of label ids in reading order, vertical flag)
        """
        labels, count = ndimage.label(fg, structure=EIGHT_CONNECTED)
        if count == 0:
            return labels, [], False
        ids = np.arange(1, count + 1)
        sizes = ndimage.sum(fg, labels, ids)
        keep = [int(i) for i, size in zip(ids, sizes) if size >= MIN_COMPONENT_FRACTION * sizes.max()]
        slices = ndimage.find_objects(labels)
        centroids = np.array(ndimage.center_of_mass(fg, labels, keep)).reshape(-1, 2)

        vertical = len(keep) > 1 and np.ptp(centroids[:, 0]) > np.ptp(centroids[:, 1])
        axis = 0 if vertical else 1
        spans = sorted(
            ((slices[i - 1][axis].start, slices[i - 1][axis].stop, i) for i in keep),
            key=lambda span: (span[0], span[1]),
        )

        groups: List[List[int]] = []
        end = -1
        for start, stop, label in spans:
            if groups and start < end:
                groups[-1].append(label)
                end = max(end, stop)
            else:
                groups.append([label])
                end = stop
        return labels, groups, bool(vertical)

    def classify(self, glyph: np.ndarray) -> Tuple[str, float]:
        """Best atlas match for one cropped glyph map"""
        height = glyph.shape[0]
        sample = to_canvas(glyph / max(float(glyph.max()), 1e-12))
        best_char, best_score = '', -1.0
        for char in self.charset:
            for thickness in self.thicknesses:
                score = ncc(sample, glyph_template(char, height, thickness))
                if score > best_score:
                    best_char, best_score = char, score
        return best_char, best_score

    def recognize_with_scores(self, region: np.ndarray) -> List[Tuple[str, float]]:
        region = np.asarray(region)
        if region.size == 0 or min(region.shape[:2]) < 2:
            return []
        dev, fg = self.foreground(region)
        labels, groups, _ = self.segment(fg)
        results = []
        for group in groups:
            member = np.isin(labels, group)
            ys, xs = np.nonzero(member)
            # one-pixel halo keeps the anti-aliased stroke edges
            soft = ndimage.binary_dilation(member, structure=EIGHT_CONNECTED)
            crop = np.where(soft, dev, 0.0)[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
            if crop.shape[0] < 2:
                continue
            results.append(self.classify(crop))
        return results

    def recognize(self, region: np.ndarray) -> str:
        """Transcript of a region; empty for blank input"""
        return ''.join(char for char, _ in self.recognize_with_scores(region))


_DEFAULT: Dict[str, TemplateRecognizer] = {}


def template_recognizer(region: np.ndarray, atlas: Optional[str] = None) -> str:
    """Functional entry point sharing one recognizer per charset"""
    key = atlas or ''
    if key not in _DEFAULT:
        _DEFAULT[key] = TemplateRecognizer(charset=atlas)
    return _DEFAULT[key].recognize(region)
