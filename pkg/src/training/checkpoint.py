"""
Checkpoint files: a JSON header next to the tensor payload

The header holds everything needed to rebuild the network (model config,
ablation flags) plus the step, seed and config hash of the run.
"""
import json
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import torch

from ..utils.errors import DatasetIOError, MetadataError
from ..utils.logger import get_logger
from .model import ModelConfig, TextAwareSR

logger = get_logger()

CHECKPOINT_FORMAT = 1


def checkpoint_name(step: int) -> str:
    return f"checkpoint_step{step:06d}.pt"


def build_header(model: TextAwareSR, step: int, seed: int, config_hash: str = '',
                 extra: Optional[Dict] = None) -> Dict:
    return {
        'format': CHECKPOINT_FORMAT,
        'step': int(step),
        'seed': int(seed),
        'config_hash': config_hash,
        'model_config': model.cfg.to_dict(),
        'use_taca': model.use_taca,
        'use_jsd': model.use_jsd,
        **(extra or {}),
    }


def save_checkpoint(path: Union[str, Path], model: TextAwareSR, step: int, seed: int,
                    config_hash: str = '', optimizer: Optional[torch.optim.Optimizer] = None,
                    extra: Optional[Dict] = None) -> Path:
    """Write <path> (tensors + header) and <path>.json (header only)"""
    path = Path(path)
    header = build_header(model, step, seed, config_hash, extra)
    payload = {
        'header': json.dumps(header, sort_keys=True),
        'model': model.state_dict(),
    }
    if optimizer is not None:
        payload['optimizer'] = optimizer.state_dict()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(payload, path)
        with open(path.with_suffix('.json'), 'w') as f:
            json.dump(header, f, indent=2, sort_keys=True)
    except OSError as exc:
        raise DatasetIOError(f"Cannot write checkpoint {path}: {exc}") from exc
    logger.info(f"Checkpoint saved: {path} (step {step})")
    return path


def read_checkpoint(path: Union[str, Path]) -> Dict:
    path = Path(path)
    if not path.exists():
        raise DatasetIOError(f"Checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location='cpu', weights_only=True)
    except (RuntimeError, EOFError) as exc:
        raise MetadataError(f"Unreadable checkpoint {path}: {exc}") from exc
    if 'header' not in payload or 'model' not in payload:
        raise MetadataError(f"Checkpoint {path} lacks header or model state")
    payload['header'] = json.loads(payload['header'])
    return payload


def load_checkpoint(path: Union[str, Path]) -> Tuple[TextAwareSR, Dict]:
    """Rebuild the model from the header and load its weights; returns (model in eval mode, header)"""
    payload = read_checkpoint(path)
    header = payload['header']
    cfg_dict = header['model_config']
    cfg = ModelConfig.from_config(cfg_dict, schedule=cfg_dict.get('schedule'))
    model = TextAwareSR(cfg, use_taca=header.get('use_taca', True), use_jsd=header.get('use_jsd', True))
    model.load_state_dict(payload['model'])
    model.eval()
    logger.info(f"Loaded checkpoint {path} (step {header['step']}, config {header.get('config_hash', '-')})")
    return model, header
