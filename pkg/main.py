"""
TextSR - text-aware one-step diffusion super-resolution
Command-line orchestrator: synthesize data, train, infer, evaluate, inspect
"""
import argparse
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.utils.config_loader import get_config, reset_config
from src.utils.errors import TextSRError
from src.utils.imaging import load_png, quantize, save_png
from src.utils.logger import setup_logger, get_logger

from src.synthesis.dataset import SynthConfig, generate_dataset
from src.losses.objective import LossWeights
from src.training.model import ModelConfig
from src.training.trainer import TrainConfig, Trainer
from src.training.inference import attention_dump, infer, predict_split
from src.training.gradcheck import run_gradcheck
from src.evaluation.evaluate import evaluate_directory

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


class CLIParser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; here 2 is reserved for I/O failures"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


class TextSRApp:
    """Main application class: one method per subcommand"""

    def __init__(self, config_path: str = None, override_file: str = None):
        # Load configuration
        self.config = get_config(config_path)
        if override_file:
            self.config.update_from_file(override_file)

        # Setup logger
        log_file = self.config.base_dir / self.config.get('logging.log_file', 'logs/textsr.log')
        log_level = self.config.get('logging.level', 'INFO')
        self.config_hash = self.config.config_hash()
        self.logger = setup_logger(log_file=str(log_file), level=log_level, config_hash=self.config_hash)
        self.progress = bool(self.config.get('logging.progress', True))

        self.logger.info("=" * 60)
        self.logger.info(f"TextSR - config {self.config_hash}")
        self.logger.info("=" * 60)

    def _path(self, given: Optional[str], key: str, default: str) -> Path:
        """Explicit paths are taken as given; configured ones are relative to the repository"""
        if given:
            return Path(given)
        return self.config.base_dir / self.config.get(key, default)

    def _dataset(self, given: Optional[str]) -> Path:
        return self._path(given, 'paths.dataset', 'data/ftsr')

    def synth(self, n: int, out: Optional[str] = None, seed: Optional[int] = None) -> Dict:
        cfg = SynthConfig.from_config(self.config.get('synthesis', {}))
        out_dir = self._dataset(out)
        root_seed = seed
        if root_seed is None:
            # synthesis.seed, then training.seed
            root_seed = int(self.config.get('synthesis.seed', self.config.get('training.seed', 0)))
        self.logger.info(f"Synthesizing {n} samples into {out_dir} (root seed {root_seed})")
        manifest = generate_dataset(n, cfg, root_seed=root_seed, out_dir=out_dir,
                                    workers=cfg.workers, progress=self.progress)
        return {'manifest': manifest, 'samples': n}

    def train(self, steps: Optional[int] = None, data: Optional[str] = None, out: Optional[str] = None,
              seed: Optional[int] = None) -> Dict:
        section = dict(self.config.get('training', {}))
        section['data_root'] = str(self._dataset(data))
        section['out_dir'] = str(self._path(out, 'training.out_dir', 'runs/train'))
        if steps is not None:
            section['max_steps'] = steps
        if seed is not None:
            section['seed'] = seed

        cfg = TrainConfig.from_config(section)
        model_cfg = ModelConfig.from_config(self.config.get('model', {}), schedule=self.config.get('schedule', {}))
        weights = LossWeights.from_config(self.config.get('losses', {}))
        self.logger.info(f"Training {cfg.max_steps} steps on {cfg.data_root} (seed {cfg.seed})")

        result = Trainer(cfg, model_cfg, weights, self.config_hash, self.progress).train()
        return {
            'checkpoint': result.checkpoint,
            'metrics': result.metrics_path,
            'initial_loss': result.losses[0],
            'final_loss': result.losses[-1],
        }

    def infer(self, checkpoint: str, data: Optional[str] = None, image: Optional[str] = None,
              out: Optional[str] = None, split: str = 'test', heatmaps: bool = False) -> Dict:
        out_dir = Path(out) if out else self.config.runs_dir / 'infer'
        if image:
            result = infer(checkpoint, load_png(image), heatmaps=heatmaps)
            stem = Path(image).stem
            save_png(out_dir / 'sr' / f"{stem}.png", quantize(result.x_hat))
            save_png(out_dir / 'mask' / f"{stem}.png", result.s_hat)
            if result.heatmap is not None:
                save_png(out_dir / 'heatmap' / f"{stem}.png", result.heatmap)
            self.logger.info(f"Super-resolved {image} -> {out_dir}")
        else:
            predict_split(checkpoint, self._dataset(data), out_dir, split=split,
                          heatmaps=heatmaps, progress=self.progress)
        return {'output': out_dir}

    def evaluate(self, pred: Optional[str] = None, data: Optional[str] = None, out: Optional[str] = None,
                 baseline: bool = False, split: Optional[str] = None) -> Dict:
        out_dir = self._path(out, 'evaluation.out_dir', 'runs/eval')
        report = evaluate_directory(
            self._dataset(data), out_dir, pred_dir=pred, baseline=baseline,
            split=split or self.config.get('evaluation.split', 'test'),
            config_hash=self.config_hash,
            workers=int(self.config.get('evaluation.workers', 4)),
            progress=self.progress,
            dump_samples=int(self.config.get('evaluation.dump_samples', 0)),
        )
        return {'report': out_dir / 'report.json', 'metrics': report.metrics, 'samples': report.n_samples}

    def attnviz(self, checkpoint: str, image: str, out: Optional[str] = None) -> Dict:
        out_dir = Path(out) if out else self.config.runs_dir / 'attnviz'
        index = attention_dump(checkpoint, load_png(image), out_dir)
        return {'index': index}

    def gradcheck(self, trials: Optional[int] = None, seed: Optional[int] = None,
                  out: Optional[str] = None) -> bool:
        trials = trials or int(self.config.get('gradcheck.trials', 50))
        table, passed = run_gradcheck(trials, 0 if seed is None else seed)
        print(table.to_string(index=False))
        if out:
            Path(out).mkdir(parents=True, exist_ok=True)
            table.to_csv(Path(out) / 'gradcheck.csv', index=False)
        return passed

    def print_summary(self, command: str, results: Dict, elapsed: float):
        print("\n" + "=" * 60)
        print(f"TEXTSR - {command.upper()}")
        print("=" * 60)
        for key, value in results.items():
            if isinstance(value, dict):
                value = ', '.join(f"{k}={'-' if v is None else f'{v:.4f}'}" for k, v in value.items())
            elif isinstance(value, float):
                value = f"{value:.4f}"
            print(f"{key + ':':<16} {value}")
        print(f"{'elapsed:':<16} {elapsed:.2f}s")
        print("=" * 60 + "\n")


def build_parser() -> CLIParser:
    common = CLIParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Root seed (default from config)')
    common.add_argument('--config', default=None, help='JSON/YAML document merged over config/config.yaml')
    common.add_argument('--out', default=None, help='Output directory')

    parser = CLIParser(prog='textsr', description='Text-aware one-step diffusion super-resolution')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', parents=[common], help='Generate a synthetic (x_L, x_H, s) dataset')
    p.add_argument('--n', type=int, required=True, help='Number of samples')

    p = sub.add_parser('train', parents=[common], help='Train on a synthesized dataset')
    p.add_argument('--steps', type=int, default=None)
    p.add_argument('--data', default=None, help='Dataset root (default paths.dataset)')

    p = sub.add_parser('infer', parents=[common], help='Super-resolve a split or a single image')
    p.add_argument('--checkpoint', required=True)
    source = p.add_mutually_exclusive_group()
    source.add_argument('--data', default=None)
    source.add_argument('--input', default=None, help='Single low-resolution image')
    p.add_argument('--split', default='test')
    p.add_argument('--heatmaps', action='store_true', help='Also write keyword attention heatmaps')

    p = sub.add_parser('eval', parents=[common], help='Score predictions against ground truth')
    target = p.add_mutually_exclusive_group(required=True)
    target.add_argument('--pred', default=None, help='Directory written by `infer`')
    target.add_argument('--baseline', action='store_true', help='Score bicubic upsampling instead')
    p.add_argument('--data', default=None)
    p.add_argument('--split', default=None)

    p = sub.add_parser('attnviz', parents=[common], help='Dump per-layer keyword attention maps')
    p.add_argument('--checkpoint', required=True)
    p.add_argument('--input', required=True)

    p = sub.add_parser('gradcheck', parents=[common], help='Run the finite-difference gradient suite')
    p.add_argument('--trials', type=int, default=None)

    return parser


def run(app: TextSRApp, args: argparse.Namespace) -> int:
    start_time = time.time()
    if args.command == 'gradcheck':
        passed = app.gradcheck(args.trials, args.seed, args.out)
        return EXIT_OK if passed else EXIT_INVALID

    if args.command == 'synth':
        results = app.synth(args.n, args.out, args.seed)
    elif args.command == 'train':
        results = app.train(args.steps, args.data, args.out, args.seed)
    elif args.command == 'infer':
        results = app.infer(args.checkpoint, args.data, args.input, args.out, args.split, args.heatmaps)
    elif args.command == 'eval':
        results = app.evaluate(args.pred, args.data, args.out, args.baseline, args.split)
    else:
        results = app.attnviz(args.checkpoint, args.input, args.out)

    app.print_summary(args.command, results, time.time() - start_time)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (None, 0) else EXIT_INVALID

    logger = get_logger()
    try:
        reset_config()
        app = TextSRApp(override_file=args.config)
        return run(app, args)
    except OSError as e:
        logger.error(f"I/O error: {e}")
        print(f"\nI/O error: {e}\n", file=sys.stderr)
        return EXIT_IO
    except (TextSRError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"\nError: {e}\n", file=sys.stderr)
        return EXIT_INVALID
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        print("\nInterrupted by user.\n", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        print(f"\nError: {e}\n", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
