"""
Training loop with ablation switches, JSON-lines metrics and checkpoints
"""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Tuple

import torch
from tqdm import tqdm

from ..losses.objective import LossWeights, loss_breakdown
from ..utils.errors import DatasetIOError, ParameterError, TrainingDivergedError
from ..utils.logger import attach_run_log, detach_run_log, get_logger
from .checkpoint import checkpoint_name, save_checkpoint
from .data import TripletDataset, make_loader
from .model import ModelConfig, TextAwareSR, count_parameters, trainable_parameters

logger = get_logger()

METRICS_FILE = 'metrics.jsonl'


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-5
    batch_size: int = 1
    max_steps: int = 2000
    seed: int = 0
    t_fixed: int = 200
    use_jsd: bool = True
    use_taca: bool = True
    use_mf_loss: bool = True
    data_root: str = 'data/ftsr'
    out_dir: str = 'runs/train'
    split: str = 'train'
    checkpoint_interval: int = 500
    log_interval: int = 50
    betas: Tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.max_steps < 1:
            raise ParameterError("max_steps must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.checkpoint_interval < 1 or self.log_interval < 1:
            raise ParameterError("checkpoint_interval and log_interval must be >= 1")

    @classmethod
    def from_config(cls, config: Dict = None) -> 'TrainConfig':
        config = config or {}
        ablation = config.get('ablation', {}) or {}
        return cls(
            learning_rate=float(config.get('learning_rate', cls.learning_rate)),
            batch_size=int(config.get('batch_size', cls.batch_size)),
            max_steps=int(config.get('max_steps', cls.max_steps)),
            seed=int(config.get('seed', cls.seed)),
            t_fixed=int(config.get('t_fixed', cls.t_fixed)),
            use_jsd=bool(ablation.get('use_jsd', cls.use_jsd)),
            use_taca=bool(ablation.get('use_taca', cls.use_taca)),
            use_mf_loss=bool(ablation.get('use_mf_loss', cls.use_mf_loss)),
            data_root=str(config.get('data_root', cls.data_root)),
            out_dir=str(config.get('out_dir', cls.out_dir)),
            split=str(config.get('split', cls.split)),
            checkpoint_interval=int(config.get('checkpoint_interval', cls.checkpoint_interval)),
            log_interval=int(config.get('log_interval', cls.log_interval)),
            betas=tuple(float(b) for b in config.get('betas', cls.betas)),
            weight_decay=float(config.get('weight_decay', cls.weight_decay)),
        )


@dataclass
class TrainResult:
    checkpoint: Path
    metrics_path: Path
    history: List[Dict] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [row['loss_total'] for row in self.history]


def cycle(loader) -> Iterator[Dict]:
    while True:
        yield from loader


class Trainer:
    """
    Optimizes the full objective on a synthesized dataset

    Args:
        cfg: Run settings and ablation flags
        model_cfg: Network layout; its schedule step is replaced by cfg.t_fixed
        weights: Loss weights; the edge-loss weight is zeroed when
            cfg.use_mf_loss is False
        config_hash: Recorded in checkpoint headers
    """

    def __init__(self, cfg: TrainConfig = TrainConfig(), model_cfg: ModelConfig = ModelConfig(),
                 weights: LossWeights = LossWeights(), config_hash: str = '', progress: bool = True):
        self.cfg = cfg
        self.model_cfg = replace(model_cfg, schedule=replace(model_cfg.schedule, t_fixed=cfg.t_fixed))
        self.weights = weights if cfg.use_mf_loss else replace(weights, mf=0.0)
        self.config_hash = config_hash
        self.progress = progress
        self.out_dir = Path(cfg.out_dir)

        torch.manual_seed(cfg.seed)
        self.model = TextAwareSR(self.model_cfg, use_taca=cfg.use_taca, use_jsd=cfg.use_jsd)
        self.optimizer = torch.optim.AdamW(
            trainable_parameters(self.model), lr=cfg.learning_rate,
            betas=cfg.betas, weight_decay=cfg.weight_decay,
        )
        counts = count_parameters(self.model)
        logger.info(f"Model ready: {counts['trainable']}/{counts['total']} trainable parameters "
                    f"(jsd={cfg.use_jsd}, taca={cfg.use_taca}, mf={cfg.use_mf_loss})")

    def _prepare_output(self) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            metrics_path = self.out_dir / METRICS_FILE
            metrics_path.write_text('')
        except OSError as exc:
            raise DatasetIOError(f"Cannot write to run directory {self.out_dir}: {exc}") from exc
        return metrics_path

    def step(self, batch: Dict):
        out = self.model(batch['x_L'])
        return loss_breakdown(out.x_hat, batch['x_H'], out.s_hat, batch['s'], self.weights,
                              use_predicted_mask=self.cfg.use_jsd)

    def _dump_divergence(self, step: int, batch: Dict, losses: Dict) -> Path:
        path = self.out_dir / f"nan_dump_step{step}.pt"
        torch.save({
            'step': step,
            'ids': list(batch['id']),
            'x_L': batch['x_L'],
            'x_H': batch['x_H'],
            's': batch['s'],
            'losses': losses,
        }, path)
        return path

    def train(self) -> TrainResult:
        dataset = TripletDataset(self.cfg.data_root, self.cfg.split)
        loader = make_loader(dataset, self.cfg.batch_size, seed=self.cfg.seed)
        metrics_path = self._prepare_output()
        run_log = attach_run_log(self.out_dir, self.config_hash)
        try:
            return self._run(loader, metrics_path)
        finally:
            detach_run_log(run_log)

    def _run(self, loader, metrics_path: Path) -> TrainResult:
        history: List[Dict] = []
        checkpoint = None

        self.model.train()
        batches = cycle(loader)
        with open(metrics_path, 'a') as metrics_file, \
                tqdm(total=self.cfg.max_steps, desc='train', disable=not self.progress) as pbar:
            for step in range(self.cfg.max_steps):
                batch = next(batches)
                breakdown = self.step(batch)
                row = {'step': step, **breakdown.as_log()}

                if not torch.isfinite(breakdown.total):
                    dump = self._dump_divergence(step, batch, row)
                    logger.error(f"Non-finite loss at step {step}, batch dumped to {dump}")
                    raise TrainingDivergedError(f"Loss diverged at step {step}: {row}")

                self.optimizer.zero_grad(set_to_none=True)
                breakdown.total.backward()
                self.optimizer.step()

                metrics_file.write(json.dumps(row) + '\n')
                history.append(row)
                pbar.update(1)
                if step % self.cfg.log_interval == 0:
                    logger.info(f"step {step}: total {row['loss_total']:.4f} img {row['loss_img']:.4f} "
                                f"seg {row['loss_seg']:.4f} mf {row['loss_mf']:.4f}")

                done = step + 1
                if done % self.cfg.checkpoint_interval == 0 or done == self.cfg.max_steps:
                    checkpoint = save_checkpoint(self.out_dir / checkpoint_name(done), self.model, done,
                                                 self.cfg.seed, self.config_hash, self.optimizer)

        logger.info(f"Training finished after {self.cfg.max_steps} steps, "
                    f"final loss {history[-1]['loss_total']:.4f}")
        return TrainResult(checkpoint=checkpoint, metrics_path=metrics_path, history=history)


def train(cfg: TrainConfig = TrainConfig(), model_cfg: ModelConfig = ModelConfig(),
          weights: LossWeights = LossWeights(), config_hash: str = '', progress: bool = True) -> TrainResult:
    return Trainer(cfg, model_cfg, weights, config_hash, progress).train()
