"""
Unit tests for the evaluation pipeline: edit distance, image and mask metrics,
OCR accuracy, reports and directory scoring.
"""
import json
import tempfile
import unittest
import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import pandas as pd
from hypothesis import given, settings
from hypothesis.strategies import text

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.evaluation.levenshtein import levenshtein, lev_ratio
from src.evaluation.metrics import PSNR_CAP, dice_coef, iou, psnr, ssim
from src.evaluation.ocr import box_ratios, crop_box, ocr_a
from src.evaluation.recognizer import TemplateRecognizer, ncc, template_recognizer, to_canvas
from src.evaluation.report import aggregate, emit_report, load_report
from src.evaluation.evaluate import evaluate_directory, evaluate_sample
from src.synthesis.dataset import SynthConfig, generate_dataset, load_triplet, read_manifest
from src.synthesis.glyphs import render_glyph
from src.utils.errors import MetadataError, ParameterError, ShapeError
from src.utils.imaging import save_png

SHORT = text(alphabet='abcd', max_size=8)


def levenshtein_ref(a: str, b: str) -> int:
    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0 or j == 0:
            return i + j
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


class FixedRecognizer:
    """Reads 'kitten' from bright crops and 'sitting' from dark ones"""

    def recognize(self, region):
        return 'kitten' if float(np.mean(region)) > 0.5 else 'sitting'


class TestLevenshtein(unittest.TestCase):
    """Edit distance and the normalized ratio."""

    @settings(max_examples=500, deadline=None)
    @given(SHORT, SHORT)
    def test_matches_reference(self, a, b):
        self.assertEqual(levenshtein(a, b), levenshtein_ref(a, b))

    @settings(max_examples=1000, deadline=None)
    @given(SHORT, SHORT, SHORT)
    def test_metric_axioms(self, a, b, c):
        self.assertEqual(levenshtein(a, a), 0)
        self.assertEqual(levenshtein(a, b), levenshtein(b, a))
        self.assertLessEqual(levenshtein(a, c), levenshtein(a, b) + levenshtein(b, c))
        self.assertTrue(0.0 <= lev_ratio(a, b) <= 1.0)

    def test_known_values(self):
        self.assertEqual(levenshtein('kitten', 'sitting'), 3)
        self.assertAlmostEqual(lev_ratio('kitten', 'sitting'), 10 / 13, delta=1e-9)
        self.assertEqual(levenshtein('', 'abc'), 3)
        self.assertEqual(lev_ratio('', ''), 1.0)
        self.assertEqual(lev_ratio('ab', ''), 0.0)


class TestMetrics(unittest.TestCase):
    """PSNR, SSIM, IoU and Dice."""

    def setUp(self):
        self.image = np.random.default_rng(0).random((32, 32, 3)).astype(np.float32)

    def test_psnr(self):
        self.assertEqual(psnr(self.image, self.image), PSNR_CAP)
        a, b = np.full((8, 8, 3), 0.5), np.full((8, 8, 3), 0.6)
        self.assertAlmostEqual(psnr(a, b), 20.0, places=6)
        self.assertAlmostEqual(psnr(a, np.full((8, 8, 3), 0.51)), 40.0, places=6)

    def test_psnr_falls_as_noise_grows(self):
        base = 0.25 + 0.5 * self.image.astype(np.float64)
        noise = np.random.default_rng(2).normal(size=base.shape)
        scores = [psnr(base, np.clip(base + sigma * noise, 0.0, 1.0)) for sigma in (0.01, 0.03, 0.1)]
        self.assertGreater(scores[0], scores[1])
        self.assertGreater(scores[1], scores[2])

    def test_ssim(self):
        self.assertAlmostEqual(ssim(self.image, self.image), 1.0, places=10)
        noisy = np.clip(self.image + np.random.default_rng(1).normal(0, 0.2, self.image.shape), 0, 1)
        self.assertLess(ssim(self.image, noisy), 0.9)

    def test_ssim_opposite_constants_and_symmetry(self):
        self.assertLess(ssim(np.zeros((16, 16, 3)), np.ones((16, 16, 3))), 1e-3)
        other = np.random.default_rng(3).random(self.image.shape)
        self.assertAlmostEqual(ssim(self.image, other), ssim(other, self.image), places=12)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            psnr(self.image, self.image[:16])
        with self.assertRaises(ShapeError):
            iou(np.zeros((8, 8)), np.zeros((8, 4)))

    def test_mask_overlap(self):
        pred = np.zeros((4, 4))
        gt = np.zeros((4, 4))
        pred[:2] = 1.0
        gt[1:3] = 1.0
        self.assertAlmostEqual(iou(pred, gt), 4 / 12)
        self.assertAlmostEqual(dice_coef(pred, gt), 2 * 4 / 16)
        self.assertEqual(iou(np.zeros((4, 4)), np.zeros((4, 4))), 1.0)
        self.assertEqual(dice_coef(np.zeros((4, 4)), np.zeros((4, 4))), 1.0)
        self.assertEqual(iou(gt[..., None], gt), 1.0)


class TestRecognizer(unittest.TestCase):
    """Template recognizer primitives."""

    def test_blank_region_reads_empty(self):
        self.assertEqual(TemplateRecognizer().recognize(np.full((20, 20, 3), 0.4)), '')
        self.assertEqual(template_recognizer(np.zeros((1, 5, 3))), '')

    def test_single_glyph(self):
        alpha = render_glyph('L', 20, 0.16)
        region = (1.0 - alpha)[..., None].repeat(3, axis=2) * 0.8
        self.assertEqual(TemplateRecognizer().recognize(region), 'L')

    def test_primitives(self):
        self.assertEqual(to_canvas(np.ones((10, 5))).shape, (24, 24))
        a = np.random.default_rng(0).random((6, 6))
        self.assertAlmostEqual(ncc(a, a), 1.0)
        self.assertAlmostEqual(ncc(a, -a), -1.0)
        self.assertEqual(ncc(a, np.ones((6, 6))), 0.0)


class TestOCR(unittest.TestCase):
    """Region-wise OCR accuracy."""

    def test_no_boxes_gives_none(self):
        image = np.zeros((8, 8, 3))
        self.assertIsNone(ocr_a(image, image, []))

    def test_ratio_per_box(self):
        pred = np.ones((8, 8, 3))
        gt = np.zeros((8, 8, 3))
        self.assertAlmostEqual(ocr_a(pred, gt, [[0, 0, 4, 4]], FixedRecognizer()), 10 / 13)
        self.assertEqual(box_ratios(gt, gt, [[0, 0, 4, 4], [4, 4, 4, 4]], FixedRecognizer()), [1.0, 1.0])

    def test_blank_prediction_scores_zero(self):
        alpha = render_glyph('L', 20, 0.16)
        gt = (1.0 - alpha)[..., None].repeat(3, axis=2) * 0.8
        pred = np.full_like(gt, 0.8)
        h, w = gt.shape[:2]
        self.assertEqual(ocr_a(pred, gt, [[0, 0, w, h]], TemplateRecognizer()), 0.0)

    def test_crop_box(self):
        image = np.arange(48).reshape(4, 4, 3)
        np.testing.assert_array_equal(crop_box(image, [1, 2, 2, 1]), image[2:3, 1:3])
        with self.assertRaises(MetadataError):
            crop_box(image, [3, 0, 2, 2])
        with self.assertRaises(MetadataError):
            crop_box(image, [0, 0, 2])

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            box_ratios(np.zeros((8, 8, 3)), np.zeros((4, 4, 3)), [[0, 0, 2, 2]])


class TestReport(unittest.TestCase):
    """Aggregation and report files."""

    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.rows = [
            {'sample_id': '000000', 'psnr': 30.0, 'ssim': 0.9, 'iou': 0.5, 'dice': 0.6, 'ocr_a': None},
            {'sample_id': '000001', 'psnr': 20.0, 'ssim': 0.7, 'iou': None, 'dice': None, 'ocr_a': 0.8},
        ]

    def test_aggregate_skips_missing(self):
        report = aggregate(self.rows)
        self.assertEqual(report.n_samples, 2)
        self.assertAlmostEqual(report.psnr, 25.0)
        self.assertAlmostEqual(report.iou, 0.5)
        self.assertAlmostEqual(report.ocr_a, 0.8)

    def test_empty_results(self):
        with self.assertRaises(ParameterError):
            aggregate([])

    def test_report_files(self):
        emit_report(self.rows, self.tmpdir, config_hash='abc123def456', title='bicubic')
        data = load_report(self.tmpdir / 'report.json')
        self.assertEqual(data['config_hash'], 'abc123def456')
        self.assertEqual(data['n_samples'], 2)
        self.assertAlmostEqual(data['metrics']['ssim'], 0.8)

        md = (self.tmpdir / 'report.md').read_text()
        self.assertIn('| bicubic |', md)
        self.assertIn('000001', md)

        df = pd.read_csv(self.tmpdir / 'report.csv', dtype={'sample_id': str})
        self.assertEqual(list(df.columns[:6]), ['sample_id', 'psnr', 'ssim', 'iou', 'dice', 'ocr_a'])
        self.assertEqual(list(df['sample_id']), ['000000', '000001'])

    def test_sample_dumps(self):
        dumps = {'000000': {'sr': np.zeros((8, 8, 3)), 'mask': np.ones((8, 8))}}
        emit_report(self.rows, self.tmpdir, dumps=dumps)
        self.assertTrue((self.tmpdir / 'samples' / '000000_sr.png').exists())
        self.assertTrue((self.tmpdir / 'samples' / '000000_mask.png').exists())


class TestEvaluateDirectory(unittest.TestCase):
    """Scoring predictions and the bicubic baseline on a tiny dataset."""

    @classmethod
    def setUpClass(cls):
        cls.tmpdir = Path(tempfile.mkdtemp())
        cls.data = cls.tmpdir / 'data'
        generate_dataset(3, SynthConfig(train_fraction=0.0, workers=1), root_seed=0,
                         out_dir=cls.data, progress=False)
        cls.manifest = read_manifest(cls.data)

    def test_perfect_predictions(self):
        pred = self.tmpdir / 'pred'
        for entry in self.manifest['samples']:
            triplet = load_triplet(self.data, entry)
            save_png(pred / 'sr' / f"{entry['id']}.png", triplet.x_H)
            save_png(pred / 'mask' / f"{entry['id']}.png", triplet.s)

        report = evaluate_directory(self.data, self.tmpdir / 'eval_pred', pred_dir=pred, workers=2,
                                    progress=False, config_hash='0' * 12)
        self.assertEqual(report.n_samples, 3)
        self.assertEqual(report.psnr, PSNR_CAP)
        self.assertAlmostEqual(report.ssim, 1.0, places=10)
        self.assertEqual(report.iou, 1.0)
        self.assertEqual(report.dice, 1.0)
        if report.ocr_a is not None:
            self.assertEqual(report.ocr_a, 1.0)
        ids = [row['sample_id'] for row in report.per_sample]
        self.assertEqual(ids, [e['id'] for e in self.manifest['samples']])

    def test_bicubic_baseline(self):
        out = self.tmpdir / 'eval_bicubic'
        report = evaluate_directory(self.data, out, baseline=True, workers=2, progress=False, dump_samples=1)
        self.assertIsNone(report.iou)
        self.assertIsNone(report.dice)
        self.assertLess(report.psnr, PSNR_CAP)
        with open(out / 'report.json') as f:
            self.assertEqual(json.load(f)['n_samples'], 3)
        self.assertEqual(len(list((out / 'samples').glob('*.png'))), 1)

    def test_requires_predictions_or_baseline(self):
        with self.assertRaises(ParameterError):
            evaluate_directory(self.data, self.tmpdir / 'eval_none', progress=False)

    def test_sample_row(self):
        image = np.full((8, 8, 3), 0.5, dtype=np.float32)
        row = evaluate_sample(image, image, [], sample_id='x')
        self.assertIsNone(row['ocr_a'])
        self.assertIsNone(row['iou'])
        self.assertEqual(row['n_boxes'], 0)


if __name__ == '__main__':
    unittest.main()
