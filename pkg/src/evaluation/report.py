"""
Evaluation report writer
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from jinja2 import Template

from ..utils.errors import DatasetIOError, ParameterError
from ..utils.imaging import save_png
from ..utils.logger import get_logger

logger = get_logger()

METRIC_KEYS = ('psnr', 'ssim', 'iou', 'dice', 'ocr_a')


@dataclass
class MetricReport:
    """Dataset-level means of the per-sample metrics; None where no sample has a value"""
    n_samples: int
    psnr: Optional[float]
    ssim: Optional[float]
    iou: Optional[float]
    dice: Optional[float]
    ocr_a: Optional[float]
    per_sample: List[Dict] = field(default_factory=list)

    @property
    def metrics(self) -> Dict[str, Optional[float]]:
        return {key: getattr(self, key) for key in METRIC_KEYS}

    def to_dict(self, config_hash: str = '') -> Dict:
        return {
            'config_hash': config_hash,
            'n_samples': self.n_samples,
            'metrics': self.metrics,
            'per_sample': [dict(row) for row in self.per_sample],
        }


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return float(np.mean(present))


def aggregate(results: Sequence[Mapping]) -> MetricReport:
    """
    Average per-sample metric rows into a MetricReport

    Missing or None entries (e.g. OCR-A for images without text, masks for
    the bicubic baseline) are left out of the corresponding mean.
    """
    if len(results) == 0:
        raise ParameterError("Cannot build a report from an empty result set")
    rows = [dict(r) for r in results]
    means = {key: _mean([row.get(key) for row in rows]) for key in METRIC_KEYS}
    return MetricReport(n_samples=len(rows), per_sample=rows, **means)


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return '-' if value is None else f"{value:.{digits}f}"


class ReportGenerator:
    """Write report.json, report.md and report.csv for one evaluation run"""

    def __init__(self, config: Dict = None, output_dir: str = "reports"):
        self.config = config or {}
        self.output_dir = Path(output_dir)
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DatasetIOError(f"Cannot create report directory {self.output_dir}: {exc}") from exc

    def generate(self, report: MetricReport, config_hash: str = '', title: str = 'model',
                 dumps: Optional[Mapping[str, Mapping[str, np.ndarray]]] = None) -> Dict[str, Path]:
        paths = {
            'json': self._generate_json_report(report, config_hash),
            'md': self._generate_markdown_report(report, config_hash, title),
            'csv': self._generate_csv_report(report),
        }
        if dumps:
            paths['samples'] = self._dump_images(dumps)

        logger.info(f"Generated evaluation report: {paths['md']}")
        logger.info(f"Summary: {self._generate_summary(report)}")
        return paths

    def _generate_json_report(self, report: MetricReport, config_hash: str) -> Path:
        filepath = self.output_dir / 'report.json'
        try:
            with open(filepath, 'w') as f:
                json.dump(report.to_dict(config_hash), f, indent=2, sort_keys=True)
        except OSError as exc:
            raise DatasetIOError(f"Cannot write {filepath}: {exc}") from exc
        return filepath

    def _generate_markdown_report(self, report: MetricReport, config_hash: str, title: str) -> Path:
        md_template = """\
# Evaluation report

- config hash: `{{ config_hash }}`
- samples: {{ n_samples }}

| Method | PSNR | SSIM | IoU | Dice | OCR-A |
|---|---|---|---|---|---|
| {{ title }} | {{ psnr }} | {{ ssim }} | {{ iou }} | {{ dice }} | {{ ocr_a }} |

## Per sample

| Sample | PSNR | SSIM | IoU | Dice | OCR-A |
|---|---|---|---|---|---|
{% for row in rows -%}
| {{ row.sample_id }} | {{ row.psnr }} | {{ row.ssim }} | {{ row.iou }} | {{ row.dice }} | {{ row.ocr_a }} |
{% endfor %}"""

        rows = [
            {'sample_id': row.get('sample_id', i), 'psnr': _fmt(row.get('psnr'), 2),
             **{key: _fmt(row.get(key)) for key in METRIC_KEYS[1:]}}
            for i, row in enumerate(report.per_sample)
        ]
        content = Template(md_template).render(
            config_hash=config_hash or '-',
            n_samples=report.n_samples,
            title=title,
            psnr=_fmt(report.psnr, 2),
            ssim=_fmt(report.ssim),
            iou=_fmt(report.iou),
            dice=_fmt(report.dice),
            ocr_a=_fmt(report.ocr_a),
            rows=rows,
        )

        filepath = self.output_dir / 'report.md'
        try:
            with open(filepath, 'w') as f:
                f.write(content)
        except OSError as exc:
            raise DatasetIOError(f"Cannot write {filepath}: {exc}") from exc
        return filepath

    def _generate_csv_report(self, report: MetricReport) -> Path:
        filepath = self.output_dir / 'report.csv'
        df = pd.DataFrame(report.per_sample)
        columns = ['sample_id'] + list(METRIC_KEYS)
        df = df.reindex(columns=[c for c in columns if c in df.columns] +
                        [c for c in df.columns if c not in columns])
        df.to_csv(filepath, index=False)
        logger.info(f"Generated CSV report: {filepath}")
        return filepath

    def _dump_images(self, dumps: Mapping[str, Mapping[str, np.ndarray]]) -> Path:
        """One PNG per (sample, name) pair under samples/"""
        root = self.output_dir / 'samples'
        for sample_id, images in sorted(dumps.items()):
            for name, image in sorted(images.items()):
                save_png(root / f"{sample_id}_{name}.png", image)
        return root

    def _generate_summary(self, report: MetricReport) -> str:
        return (f"{report.n_samples} samples | PSNR {_fmt(report.psnr, 2)} dB | "
                f"SSIM {_fmt(report.ssim)} | IoU {_fmt(report.iou)} | "
                f"Dice {_fmt(report.dice)} | OCR-A {_fmt(report.ocr_a)}")


def emit_report(results: Sequence[Mapping], out_dir, config_hash: str = '', title: str = 'model',
                dumps: Optional[Mapping[str, Mapping[str, np.ndarray]]] = None) -> MetricReport:
    """Aggregate per-sample results and write the report files into out_dir"""
    report = aggregate(results)
    ReportGenerator(output_dir=str(out_dir)).generate(report, config_hash, title, dumps)
    return report


def load_report(path) -> Dict:
    with open(Path(path)) as f:
        return json.load(f)
