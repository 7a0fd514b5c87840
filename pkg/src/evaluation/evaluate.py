"""
Score a directory of super-resolved outputs against a synthesized dataset
"""
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import torch
from tqdm import tqdm

from ..backbone.encoder import pre_upsample
from ..synthesis.dataset import load_triplet, read_manifest, select_split
from ..utils.errors import ParameterError
from ..utils.imaging import load_png, quantize, to_numpy, to_tensor
from ..utils.logger import get_logger
from .metrics import dice_coef, iou, psnr, ssim
from .ocr import ocr_a
from .recognizer import TemplateRecognizer
from .report import MetricReport, emit_report

logger = get_logger()

PRED_IMAGE_DIR = 'sr'
PRED_MASK_DIR = 'mask'


def evaluate_sample(pred: np.ndarray, gt: np.ndarray, boxes, s_hat: Optional[np.ndarray] = None,
                    s: Optional[np.ndarray] = None, recognizer=None, sample_id: str = '') -> Dict:
    """One row of the per-sample table; mask metrics are None without a predicted mask"""
    row = {
        'sample_id': sample_id,
        'psnr': psnr(pred, gt),
        'ssim': ssim(pred, gt),
        'iou': None,
        'dice': None,
        'ocr_a': ocr_a(pred, gt, boxes, recognizer),
        'n_boxes': len(boxes),
    }
    if s_hat is not None and s is not None:
        row['iou'] = iou(s_hat, s)
        row['dice'] = dice_coef(s_hat, s)
    return row


def bicubic_baseline(x_L: np.ndarray, scale: int) -> np.ndarray:
    """Bicubic x`scale` upsample of the low-resolution input, on the 8-bit grid"""
    with torch.no_grad():
        up = pre_upsample(to_tensor(x_L), scale=scale).clamp(0.0, 1.0)
    return quantize(to_numpy(up))


def evaluate_directory(data_root: Union[str, Path], out_dir: Union[str, Path],
                       pred_dir: Optional[Union[str, Path]] = None, baseline: bool = False,
                       split: Optional[str] = 'test', config_hash: str = '', workers: int = 4,
                       progress: bool = True, dump_samples: int = 0) -> MetricReport:
    """
    Compute per-sample metrics and write the report

    Args:
        data_root: Dataset with manifest.json and hr/, mask/, lr/
        out_dir: Report destination
        pred_dir: Model outputs as sr/NNNNNN.png and optionally mask/NNNNNN.png
        baseline: Score the bicubic upsample of lr/ instead of pred_dir
        split: Manifest split to score, None for every sample
        dump_samples: Write prediction / mask PNGs for the first N samples
    """
    if pred_dir is None and not baseline:
        raise ParameterError("Either a prediction directory or --baseline is required")
    manifest = read_manifest(data_root)
    entries = select_split(manifest, split)
    if not entries:
        logger.warning(f"No samples in split '{split}', scoring the whole dataset")
        entries = select_split(manifest, None)
    scale = int(manifest.get('scale', 4))
    recognizer = TemplateRecognizer()
    pred_root = Path(pred_dir) if pred_dir is not None else None

    def score(entry: Dict):
        triplet = load_triplet(data_root, entry)
        s_hat = None
        if baseline:
            pred = bicubic_baseline(triplet.x_L, scale)
        else:
            pred = load_png(pred_root / PRED_IMAGE_DIR / f"{entry['id']}.png")
            mask_path = pred_root / PRED_MASK_DIR / f"{entry['id']}.png"
            if mask_path.exists():
                s_hat = load_png(mask_path, grayscale=True)
        row = evaluate_sample(pred, triplet.x_H, triplet.boxes, s_hat, triplet.s, recognizer, entry['id'])
        return row, pred, s_hat

    rows: Dict[int, Dict] = {}
    dumps: Dict[str, Dict[str, np.ndarray]] = {}
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(score, e): i for i, e in enumerate(entries)}
        with tqdm(total=len(entries), desc='eval', disable=not progress) as pbar:
            for future in as_completed(futures):
                i = futures[future]
                row, pred, s_hat = future.result()
                logger.debug(f"{row['sample_id']}: PSNR {row['psnr']:.2f} SSIM {row['ssim']:.4f}")
                rows[i] = row
                if i < dump_samples:
                    dumps[row['sample_id']] = {'sr': pred, **({'mask': s_hat} if s_hat is not None else {})}
                pbar.update(1)

    results: List[Dict] = [rows[i] for i in range(len(entries))]
    title = 'bicubic' if baseline else 'model'
    return emit_report(results, out_dir, config_hash=config_hash, title=title, dumps=dumps or None)
