"""
Unit tests for the synthetic text dataset: glyphs, backgrounds, composition,
degradation and the on-disk layout.
"""
import json
import tempfile
import unittest
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.synthesis.glyphs import ATLAS, GlyphStyle, filter_patch, render_glyph, render_glyph_patch
from src.synthesis.backgrounds import contains_text, fit_background, load_backgrounds, procedural_background
from src.synthesis.compose import ComposeOptions, boxes_overlap, compose_sample, fits_background, resize_alpha
from src.synthesis.degrade import (
    DegradeConfig,
    LUMA_TABLE,
    apply_degradation,
    degrade,
    degrade_with_params,
    jpeg_like,
    quality_table,
    resize_image,
)
from src.synthesis.dataset import (
    SynthConfig,
    generate_dataset,
    generate_sample,
    load_triplet,
    read_manifest,
    sample_name,
    select_split,
    split_for,
)
from src.evaluation.recognizer import TemplateRecognizer
from src.utils.errors import DatasetIOError, MetadataError, ParameterError, ShapeError
from src.utils.imaging import save_png


def _patches(count: int, style: GlyphStyle = GlyphStyle(min_glyphs=1, max_glyphs=3), size: int = 64):
    patches, seed = [], 0
    while len(patches) < count:
        patch = render_glyph_patch(seed, style=style)
        if fits_background(patch, size, size):
            patches.append(patch)
        seed += 1
    return patches


class TestGlyphs(unittest.TestCase):
    """Glyph patch rendering."""

    def test_mask_is_thresholded_alpha(self):
        for seed in range(5):
            patch = render_glyph_patch(seed)
            np.testing.assert_array_equal(patch.mask, patch.alpha > 0.5)
            self.assertTrue(patch.mask.any())

    def test_deterministic(self):
        a, b = render_glyph_patch(11), render_glyph_patch(11)
        np.testing.assert_array_equal(a.rgba, b.rgba)
        self.assertEqual(a.transcript, b.transcript)

    def test_transcript_respects_style_and_charset(self):
        style = GlyphStyle(min_glyphs=2, max_glyphs=4)
        for seed in range(10):
            patch = render_glyph_patch(seed, charset='LT', style=style)
            self.assertTrue(2 <= len(patch.transcript) <= 4)
            self.assertTrue(set(patch.transcript) <= {'L', 'T'})

    def test_vertical_layout(self):
        style = GlyphStyle(min_glyphs=3, max_glyphs=3, vertical_prob=1.0)
        patch = render_glyph_patch(0, style=style)
        self.assertTrue(patch.vertical)
        self.assertGreater(patch.height, patch.width)

    def test_filter_patch(self):
        patch = render_glyph_patch(3)
        ratio = max(patch.width, patch.height) / len(patch.transcript)
        self.assertTrue(filter_patch(patch, ratio))
        self.assertFalse(filter_patch(patch, ratio + 1.0))
        patch.transcript = ''
        with self.assertRaises(ParameterError):
            filter_patch(patch)

    def test_invalid_charset(self):
        with self.assertRaises(ParameterError):
            render_glyph_patch(0, charset='')
        with self.assertRaises(ParameterError):
            render_glyph_patch(0, charset='Lq')
        with self.assertRaises(ParameterError):
            render_glyph('q', 16, 0.15)

    def test_style_validation(self):
        with self.assertRaises(ParameterError):
            GlyphStyle(min_glyphs=4, max_glyphs=2)
        with self.assertRaises(ParameterError):
            GlyphStyle(thickness=(0.1, 0.6))
        style = GlyphStyle.from_config({'max_glyphs': 3, 'glyph_height': [12, 14]})
        self.assertEqual(style.glyph_height, (12, 14))
        self.assertEqual(style.min_glyphs, 1)


class TestBackgrounds(unittest.TestCase):
    """Procedural and user-supplied backgrounds."""

    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.recognizer = TemplateRecognizer()

    def test_procedural_range(self):
        bg = procedural_background(32, 48, np.random.default_rng(0))
        self.assertEqual(bg.shape, (32, 48, 3))
        self.assertEqual(bg.dtype, np.float32)
        self.assertGreaterEqual(bg.min(), 0.0)
        self.assertLessEqual(bg.max(), 1.0)

    def test_fit_background(self):
        image = np.random.default_rng(1).random((80, 120, 3)).astype(np.float32)
        self.assertEqual(fit_background(image, 64, 64).shape, (64, 64, 3))

    def test_text_background_rejected(self):
        plain = np.tile(np.linspace(0.5, 0.6, 64, dtype=np.float32), (64, 1))[..., None].repeat(3, axis=2)
        lettered = np.full((64, 64, 3), 0.8, dtype=np.float32)
        alpha = render_glyph('L', 20, 0.16)
        h, w = alpha.shape
        y, x = (64 - h) // 2, (64 - w) // 2
        lettered[y:y + h, x:x + w] = (alpha[..., None] * 0.1 + (1.0 - alpha[..., None]) * 0.8)

        self.assertFalse(contains_text(plain, self.recognizer))
        self.assertTrue(contains_text(lettered, self.recognizer))

        save_png(self.tmpdir / 'plain.png', plain)
        save_png(self.tmpdir / 'lettered.png', lettered)
        loaded = load_backgrounds(str(self.tmpdir), (64, 64), self.recognizer)
        self.assertEqual(len(loaded), 1)

    def test_missing_directory(self):
        self.assertEqual(load_backgrounds(None, (64, 64)), [])
        with self.assertRaises(DatasetIOError):
            load_backgrounds(str(self.tmpdir / 'nope'), (64, 64))


class TestCompose(unittest.TestCase):
    """Placement, blending and the text mask."""

    def setUp(self):
        self.bg = np.full((64, 64, 3), 0.5, dtype=np.float32)
        self.patches = _patches(3)

    def test_mask_is_union_of_placed_alphas(self):
        x_H, s, meta = compose_sample(self.bg, self.patches, seed=4)
        expected = np.zeros((64, 64), dtype=bool)
        for place in meta['placements']:
            x, y, h, w = place['x'], place['y'], place['height'], place['width']
            alpha = resize_alpha(self.patches[place['patch']].alpha, h, w)
            expected[y:y + h, x:x + w] |= alpha > 0.5
        np.testing.assert_array_equal(s.astype(bool), expected)
        np.testing.assert_array_equal(meta['alpha'] > 0.5, expected)
        self.assertTrue(set(np.unique(s)) <= {0.0, 1.0})
        self.assertGreaterEqual(x_H.min(), 0.0)
        self.assertLessEqual(x_H.max(), 1.0)

    def test_boxes_in_bounds_and_disjoint(self):
        for seed in range(5):
            _, _, meta = compose_sample(self.bg, self.patches, seed=seed, no_overlap=True)
            boxes = meta['boxes']
            self.assertEqual(len(boxes), len(meta['transcripts']))
            for x, y, w, h in boxes:
                self.assertTrue(0 <= x and 0 <= y and x + w <= 64 and y + h <= 64)
            for i in range(len(boxes)):
                for j in range(i + 1, len(boxes)):
                    self.assertFalse(boxes_overlap(boxes[i], boxes[j]))

    def test_placements_replay(self):
        x_a, s_a, meta = compose_sample(self.bg, self.patches, seed=7)
        x_b, s_b, _ = compose_sample(self.bg, self.patches, seed=123, placements=meta['placements'])
        np.testing.assert_array_equal(x_a, x_b)
        np.testing.assert_array_equal(s_a, s_b)

    def test_box_overlap_predicate(self):
        self.assertTrue(boxes_overlap((0, 0, 4, 4), (3, 3, 4, 4)))
        self.assertFalse(boxes_overlap((0, 0, 4, 4), (4, 0, 4, 4)))

    def test_empty_patch_list(self):
        x_H, s, meta = compose_sample(self.bg, [], seed=0)
        np.testing.assert_array_equal(x_H, self.bg)
        self.assertEqual(s.sum(), 0.0)
        self.assertEqual(meta['boxes'], [])

    def test_rejects_grayscale_background(self):
        with self.assertRaises(ShapeError):
            compose_sample(np.zeros((64, 64)), self.patches, seed=0)

    def test_options_from_config(self):
        opts = ComposeOptions.from_config({'patch_scale': [0.2, 0.3], 'no_overlap': False})
        self.assertEqual(opts.scale_range, (0.2, 0.3))
        self.assertFalse(opts.no_overlap)


class TestDegrade(unittest.TestCase):
    """Degradation chain."""

    def setUp(self):
        self.x_H = np.random.default_rng(0).random((64, 64, 3)).astype(np.float32)

    def test_shape_and_range(self):
        x_L, params = degrade_with_params(self.x_H, DegradeConfig(), seed=3)
        self.assertEqual(x_L.shape, (16, 16, 3))
        self.assertGreaterEqual(x_L.min(), 0.0)
        self.assertLessEqual(x_L.max(), 1.0)
        self.assertEqual(set(params), {'blur_sigma', 'kernel', 'noise_sigma', 'jpeg_quality', 'scale'})

    def test_deterministic(self):
        np.testing.assert_array_equal(degrade(self.x_H, seed=5), degrade(self.x_H, seed=5))
        self.assertFalse(np.array_equal(degrade(self.x_H, seed=5), degrade(self.x_H, seed=6)))

    def test_all_stages_off_is_plain_bicubic(self):
        cfg = DegradeConfig(blur_sigma=(0.0, 0.0), kernels=('bicubic',), noise_sigma=(0.0, 0.0),
                            jpeg_quality=(100, 100))
        expected = np.clip(resize_image(self.x_H, 16, 16, 'bicubic'), 0.0, 1.0).astype(np.float32)
        for seed in (1, 2):
            np.testing.assert_array_equal(degrade(self.x_H, cfg, seed=seed), expected)

    def test_quality_table(self):
        np.testing.assert_array_equal(quality_table(LUMA_TABLE, 50), LUMA_TABLE)
        self.assertTrue(np.all(quality_table(LUMA_TABLE, 100) == 1.0))

    def test_jpeg_preserves_flat_image(self):
        flat = np.full((16, 16, 3), 0.5)
        np.testing.assert_allclose(jpeg_like(flat, 40), flat, atol=1.0 / 255.0)

    def test_indivisible_or_flat_input(self):
        params = {'blur_sigma': 0.0, 'kernel': 'nearest', 'noise_sigma': 0.0, 'jpeg_quality': 100, 'scale': 4}
        with self.assertRaises(ShapeError):
            apply_degradation(np.zeros((30, 32, 3)), params, np.random.default_rng(0))
        with self.assertRaises(ShapeError):
            apply_degradation(np.zeros((32, 32)), params, np.random.default_rng(0))

    def test_config_validation(self):
        with self.assertRaises(ParameterError):
            DegradeConfig(jpeg_quality=(0, 90))
        with self.assertRaises(ParameterError):
            DegradeConfig(kernels=('lanczos7',))
        with self.assertRaises(ParameterError):
            DegradeConfig(blur_sigma=(1.0, 0.5))


class TestDataset(unittest.TestCase):
    """Triplet generation and the dataset layout."""

    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.cfg = SynthConfig(workers=2)
        self.recognizer = TemplateRecognizer()

    def test_sample_shapes(self):
        sample = generate_sample(0, self.cfg, recognizer=self.recognizer)
        self.assertEqual(sample.x_H.shape, (64, 64, 3))
        self.assertEqual(sample.x_L.shape, (16, 16, 3))
        self.assertEqual(sample.s.shape, (64, 64))
        self.assertEqual(len(sample.boxes), len(sample.transcripts))

    def test_transcripts_read_back_from_clean_image(self):
        for seed in range(12):
            sample = generate_sample(seed, self.cfg, recognizer=self.recognizer)
            for (x, y, w, h), transcript in zip(sample.boxes, sample.transcripts):
                self.assertEqual(self.recognizer.recognize(sample.x_H[y:y + h, x:x + w]), transcript)

    def test_config_validation(self):
        with self.assertRaises(ShapeError):
            SynthConfig(image_size=(62, 64))
        with self.assertRaises(ParameterError):
            SynthConfig(min_patches=3, max_patches=1)
        cfg = SynthConfig.from_config({'image_size': [32, 32], 'charset': '', 'degradation': {'scale': 2}})
        self.assertEqual(cfg.degrade.scale, 2)
        self.assertEqual(cfg.charset, ''.join(ATLAS))

    def test_split_assignment(self):
        self.assertEqual([split_for(i, 10, 0.9) for i in range(10)], ['train'] * 9 + ['test'])
        self.assertEqual(sample_name(42), '000042')

    def test_generate_and_regenerate(self):
        first = generate_dataset(4, self.cfg, root_seed=9, out_dir=self.tmpdir / 'a', progress=False)
        second = generate_dataset(4, self.cfg, root_seed=9, out_dir=self.tmpdir / 'b', progress=False)

        manifest = read_manifest(first.parent)
        self.assertEqual(manifest['n'], 4)
        self.assertEqual([e['seed'] for e in manifest['samples']], [9, 10, 11, 12])
        self.assertEqual(len(select_split(manifest, 'test')), 4 - int(round(4 * 0.9)))
        for entry in manifest['samples']:
            for rel in entry['files'].values():
                a = (first.parent / rel).read_bytes()
                b = (second.parent / rel).read_bytes()
                self.assertEqual(a, b, rel)
        self.assertEqual(first.read_text(), second.read_text())

        for entry in manifest['samples']:
            on_disk = load_triplet(first.parent, entry)
            alpha = generate_sample(entry['seed'], self.cfg, recognizer=self.recognizer).alpha
            np.testing.assert_array_equal(on_disk.s.astype(bool), alpha > 0.5, entry['id'])

        triplet = load_triplet(first.parent, manifest['samples'][0])
        self.assertEqual(triplet.x_L.shape, (16, 16, 3))
        self.assertTrue(set(np.unique(triplet.s)) <= {0.0, 1.0})

    def test_manifest_errors(self):
        with self.assertRaises(DatasetIOError):
            read_manifest(self.tmpdir)
        (self.tmpdir / 'manifest.json').write_text('{not json')
        with self.assertRaises(MetadataError):
            read_manifest(self.tmpdir)
        (self.tmpdir / 'manifest.json').write_text(json.dumps({'samples': [{'id': '000000'}]}))
        with self.assertRaises(MetadataError):
            read_manifest(self.tmpdir)

    def test_needs_at_least_one_sample(self):
        with self.assertRaises(ParameterError):
            generate_dataset(0, self.cfg, out_dir=self.tmpdir, progress=False)

    def test_hundred_samples_close(self):
        for seed in range(100):
            sample = generate_sample(seed, self.cfg, recognizer=self.recognizer)
            np.testing.assert_array_equal(sample.s.astype(bool), sample.alpha > 0.5, f"seed {seed}")
            for (x, y, w, h), transcript in zip(sample.boxes, sample.transcripts):
                self.assertEqual(self.recognizer.recognize(sample.x_H[y:y + h, x:x + w]), transcript)


if __name__ == '__main__':
    unittest.main()
