"""
Region-wise OCR accuracy: mean Levenshtein ratio over ground-truth boxes
"""
from typing import List, Optional, Protocol, Sequence

import numpy as np

from ..utils.errors import MetadataError, ShapeError
from .levenshtein import lev_ratio
from .recognizer import TemplateRecognizer


class Recognizer(Protocol):
    def recognize(self, region: np.ndarray) -> str:
        ...


def crop_box(image: np.ndarray, box: Sequence[int]) -> np.ndarray:
    """Region (x, y, w, h) of an H x W (x C) image; out-of-bounds boxes raise MetadataError"""
    if len(box) != 4:
        raise MetadataError(f"Box must be (x, y, w, h), got {list(box)}")
    x, y, w, h = (int(v) for v in box)
    height, width = image.shape[:2]
    if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > width or y + h > height:
        raise MetadataError(f"Box {list(box)} outside {width}x{height} image")
    return image[y:y + h, x:x + w]


def box_ratios(pred: np.ndarray, gt: np.ndarray, boxes: Sequence[Sequence[int]],
               recognizer: Optional[Recognizer] = None) -> List[float]:
    """Levenshtein ratio per box between the two recognized crops"""
    if pred.shape != gt.shape:
        raise ShapeError(f"Prediction {pred.shape} and ground truth {gt.shape} differ")
    recognizer = recognizer or TemplateRecognizer()
    ratios = []
    for box in boxes:
        r_gt = recognizer.recognize(crop_box(gt, box))
        r_pred = recognizer.recognize(crop_box(pred, box))
        ratios.append(lev_ratio(r_pred, r_gt))
    return ratios


def ocr_a(pred: np.ndarray, gt: np.ndarray, boxes: Sequence[Sequence[int]],
          recognizer: Optional[Recognizer] = None) -> Optional[float]:
    """
    Mean per-box ratio; None for images without boxes, which callers leave
    out of dataset-level averages
    """
    if len(boxes) == 0:
        return None
    return float(np.mean(box_ratios(pred, gt, boxes, recognizer)))
