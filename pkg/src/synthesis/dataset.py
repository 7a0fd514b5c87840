"""
Synthetic (x_L, x_H, s) triplet generation and the on-disk dataset layout

    <root>/lr/NNNNNN.png     degraded low-resolution image
    <root>/hr/NNNNNN.png     clean composed image
    <root>/mask/NNNNNN.png   text mask, 0 or 255
    <root>/manifest.json     per-sample seed, transcripts, boxes, degradation

Every sample is a pure function of (config, root_seed + index).
"""
import json
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from ..evaluation.recognizer import TemplateRecognizer
from ..utils.errors import DatasetIOError, MetadataError, ParameterError, ShapeError
from ..utils.imaging import load_png, quantize, save_png
from ..utils.logger import get_logger
from .backgrounds import load_backgrounds, procedural_background
from .compose import ComposeOptions, compose_sample, fits_background
from .degrade import DegradeConfig, degrade_with_params
from .glyphs import DEFAULT_CHARSET, GlyphPatch, GlyphStyle, filter_patch, render_glyph_patch

logger = get_logger()

MANIFEST_NAME = 'manifest.json'
MANIFEST_VERSION = 1
SUBDIRS = ('lr', 'hr', 'mask')
MAX_PATCH_DRAWS = 20
SEED_SPACE = 2 ** 31


@dataclass(frozen=True)
class SynthConfig:
    image_size: Tuple[int, int] = (64, 64)
    min_patches: int = 1
    max_patches: int = 3
    charset: str = DEFAULT_CHARSET
    min_ratio: float = 12.0
    max_attempts: int = 5
    train_fraction: float = 0.9
    background_dir: Optional[str] = None
    background_mix: float = 0.5
    background_text_ncc: float = 0.8
    workers: int = 4
    style: GlyphStyle = field(default_factory=GlyphStyle)
    compose: ComposeOptions = field(default_factory=ComposeOptions)
    degrade: DegradeConfig = field(default_factory=DegradeConfig)

    def __post_init__(self):
        h, w = self.image_size
        if h < 1 or w < 1:
            raise ParameterError(f"Invalid image size {self.image_size}")
        if h % self.degrade.scale or w % self.degrade.scale:
            raise ShapeError(f"Image size {h}x{w} not divisible by scale {self.degrade.scale}")
        if not 0 <= self.min_patches <= self.max_patches:
            raise ParameterError(f"Need 0 <= min_patches <= max_patches, got {self.min_patches}, {self.max_patches}")
        if self.max_attempts < 1:
            raise ParameterError("max_attempts must be >= 1")
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ParameterError("train_fraction must lie in [0, 1]")
        if not 0.0 <= self.background_mix <= 1.0:
            raise ParameterError("background_mix must lie in [0, 1]")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")

    @classmethod
    def from_config(cls, config: Dict = None) -> 'SynthConfig':
        config = config or {}
        return cls(
            image_size=tuple(int(v) for v in config.get('image_size', cls.image_size)),
            min_patches=int(config.get('min_patches', cls.min_patches)),
            max_patches=int(config.get('max_patches', cls.max_patches)),
            charset=str(config.get('charset') or cls.charset),
            min_ratio=float(config.get('min_ratio', cls.min_ratio)),
            max_attempts=int(config.get('max_attempts', cls.max_attempts)),
            train_fraction=float(config.get('train_fraction', cls.train_fraction)),
            background_dir=config.get('background_dir') or None,
            background_mix=float(config.get('background_mix', cls.background_mix)),
            background_text_ncc=float(config.get('background_text_ncc', cls.background_text_ncc)),
            workers=int(config.get('workers', cls.workers)),
            style=GlyphStyle.from_config(config.get('style')),
            compose=ComposeOptions.from_config(config),
            degrade=DegradeConfig.from_config(config.get('degradation')),
        )

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class SampleTriplet:
    x_L: np.ndarray
    x_H: np.ndarray
    s: np.ndarray
    transcripts: List[str]
    boxes: List[List[int]]
    seed: int
    vertical: List[bool] = field(default_factory=list)
    attempt: int = 0
    degradation: Dict = field(default_factory=dict)
    alpha: Optional[np.ndarray] = None  # composited soft coverage, not written to disk


def _draw_patches(rng: np.random.Generator, cfg: SynthConfig) -> List[GlyphPatch]:
    h, w = cfg.image_size
    count = int(rng.integers(cfg.min_patches, cfg.max_patches + 1))
    patches = []
    for _ in range(count):
        for _ in range(MAX_PATCH_DRAWS):
            patch = render_glyph_patch(int(rng.integers(SEED_SPACE)), cfg.charset, cfg.style)
            if filter_patch(patch, cfg.min_ratio) and fits_background(patch, h, w, cfg.compose):
                patches.append(patch)
                break
        else:
            logger.debug(f"No usable patch after {MAX_PATCH_DRAWS} draws")
    return patches


def unread_placements(x_H: np.ndarray, metadata: Dict, recognizer) -> List[int]:
    """Indices of placed patches whose transcript the recognizer does not read back"""
    failed = []
    for i, (box, transcript) in enumerate(zip(metadata['boxes'], metadata['transcripts'])):
        x, y, w, h = box
        if recognizer.recognize(x_H[y:y + h, x:x + w]) != transcript:
            failed.append(i)
    return failed


def _compose_checked(background: np.ndarray, patches: Sequence[GlyphPatch], seed: int, cfg: SynthConfig,
                     recognizer, final: bool) -> Optional[Tuple[np.ndarray, np.ndarray, Dict]]:
    x_H, s, metadata = compose_sample(background, patches, seed, cfg.compose.no_overlap, cfg.compose)
    x_H = quantize(x_H)
    failed = unread_placements(x_H, metadata, recognizer)
    if not failed:
        return x_H, s, metadata
    if not final:
        return None

    # drop unreadable patches until what is left reads back exactly
    placements = metadata['placements']
    while failed:
        for i in failed:
            logger.warning(f"Dropping unreadable patch '{metadata['transcripts'][i]}'")
        dropped = set(failed)
        placements = [p for i, p in enumerate(placements) if i not in dropped]
        x_H, s, metadata = compose_sample(background, patches, seed, cfg.compose.no_overlap,
                                          cfg.compose, placements=placements)
        x_H = quantize(x_H)
        failed = unread_placements(x_H, metadata, recognizer)
    return x_H, s, metadata


def generate_sample(seed: int, cfg: SynthConfig = SynthConfig(), backgrounds: Sequence[np.ndarray] = (),
                    recognizer=None) -> SampleTriplet:
    """
    Build one triplet

    Attempt k draws from the stream (seed, k). A composition whose patches
    are not all read back by the recognizer is redrawn; on the last attempt
    the unreadable patches are removed instead.
    """
    recognizer = recognizer or TemplateRecognizer(charset=cfg.charset)
    h, w = cfg.image_size

    for attempt in range(cfg.max_attempts):
        rng = np.random.default_rng([seed, attempt])
        if backgrounds and rng.random() < cfg.background_mix:
            background = backgrounds[int(rng.integers(len(backgrounds)))]
        else:
            background = procedural_background(h, w, rng)
        patches = _draw_patches(rng, cfg)
        composed = _compose_checked(background, patches, int(rng.integers(SEED_SPACE)), cfg, recognizer,
                                    final=attempt == cfg.max_attempts - 1)
        if composed is not None:
            break
        logger.debug(f"Sample seed {seed}: attempt {attempt} not read back, retrying")

    x_H, s, metadata = composed
    x_L, params = degrade_with_params(x_H, cfg.degrade, seed)
    return SampleTriplet(
        x_L=quantize(x_L), x_H=x_H, s=s,
        transcripts=list(metadata['transcripts']),
        boxes=[list(b) for b in metadata['boxes']],
        seed=int(seed),
        vertical=list(metadata['vertical']),
        attempt=attempt,
        degradation=params,
        alpha=metadata['alpha'],
    )


def sample_name(index: int) -> str:
    return f"{index:06d}"


def write_sample(root: Path, index: int, sample: SampleTriplet, split: str) -> Dict:
    """Write the three PNGs of one sample and return its manifest entry"""
    name = sample_name(index)
    files = {sub: f"{sub}/{name}.png" for sub in SUBDIRS}
    save_png(root / files['lr'], sample.x_L)
    save_png(root / files['hr'], sample.x_H)
    save_png(root / files['mask'], sample.s)
    return {
        'index': index,
        'id': name,
        'seed': sample.seed,
        'attempt': sample.attempt,
        'split': split,
        'transcripts': sample.transcripts,
        'boxes': sample.boxes,
        'vertical': sample.vertical,
        'degradation': sample.degradation,
        'files': files,
    }


def split_for(index: int, n: int, train_fraction: float) -> str:
    return 'train' if index < int(round(n * train_fraction)) else 'test'


def generate_dataset(n: int, config: SynthConfig = SynthConfig(), root_seed: int = 0,
                     out_dir: Union[str, Path] = 'data/ftsr', workers: Optional[int] = None,
                     progress: bool = True) -> Path:
    """
    Generate n triplets under out_dir

    Args:
        n: Number of samples, >= 1
        config: Synthesis settings
        root_seed: Sample i uses seed root_seed + i
        out_dir: Dataset root, created if missing
        workers: Thread count, defaults to config.workers
        progress: Show a tqdm bar

    Returns:
        Path to manifest.json
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    root = Path(out_dir)
    try:
        for sub in SUBDIRS:
            (root / sub).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetIOError(f"Cannot create dataset directory {root}: {exc}") from exc

    recognizer = TemplateRecognizer(charset=config.charset)
    backgrounds = load_backgrounds(config.background_dir, config.image_size, recognizer,
                                   config.background_text_ncc)

    logger.info(f"Generating {n} samples into {root} (root seed {root_seed})")
    entries: Dict[int, Dict] = {}

    def build(index: int) -> Dict:
        sample = generate_sample(root_seed + index, config, backgrounds, recognizer)
        return write_sample(root, index, sample, split_for(index, n, config.train_fraction))

    with ThreadPoolExecutor(max_workers=workers or config.workers) as executor:
        futures = {executor.submit(build, i): i for i in range(n)}
        with tqdm(total=n, desc='synth', disable=not progress) as pbar:
            for future in as_completed(futures):
                entries[futures[future]] = future.result()
                pbar.update(1)

    manifest = {
        'version': MANIFEST_VERSION,
        'root_seed': int(root_seed),
        'n': n,
        'image_size': list(config.image_size),
        'scale': config.degrade.scale,
        'config': config.to_dict(),
        'samples': [entries[i] for i in range(n)],
    }
    path = root / MANIFEST_NAME
    try:
        with open(path, 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
    except OSError as exc:
        raise DatasetIOError(f"Cannot write manifest {path}: {exc}") from exc

    n_train = sum(1 for e in manifest['samples'] if e['split'] == 'train')
    logger.info(f"Dataset written: {n} samples ({n_train} train / {n - n_train} test) -> {path}")
    return path


def read_manifest(root: Union[str, Path]) -> Dict:
    """Load and sanity-check a dataset manifest"""
    path = Path(root) / MANIFEST_NAME
    if not path.exists():
        raise DatasetIOError(f"Dataset manifest not found: {path}")
    try:
        with open(path) as f:
            manifest = json.load(f)
    except json.JSONDecodeError as exc:
        raise MetadataError(f"Malformed manifest {path}: {exc}") from exc
    samples = manifest.get('samples') if isinstance(manifest, dict) else None
    if not isinstance(samples, list):
        raise MetadataError(f"Manifest {path} has no sample list")
    for entry in samples:
        if not {'id', 'files', 'boxes', 'transcripts'} <= set(entry):
            raise MetadataError(f"Manifest entry missing fields: {sorted(entry)}")
    return manifest


def select_split(manifest: Dict, split: Optional[str] = None) -> List[Dict]:
    """Manifest entries of one split, all entries when split is None"""
    return [e for e in manifest['samples'] if split is None or e.get('split') == split]


def load_triplet(root: Union[str, Path], entry: Dict) -> SampleTriplet:
    root = Path(root)
    files = entry['files']
    return SampleTriplet(
        x_L=load_png(root / files['lr']),
        x_H=load_png(root / files['hr']),
        s=(load_png(root / files['mask'], grayscale=True) > 0.5).astype(np.float32),
        transcripts=list(entry['transcripts']),
        boxes=[list(b) for b in entry['boxes']],
        seed=int(entry.get('seed', 0)),
        vertical=list(entry.get('vertical', [])),
        attempt=int(entry.get('attempt', 0)),
        degradation=dict(entry.get('degradation', {})),
    )
