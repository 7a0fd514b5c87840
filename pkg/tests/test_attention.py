"""
Unit tests for keyword attention: cross attention, slice search, aggregation, heatmaps.
"""
import json
import math
import tempfile
import unittest
import sys
from pathlib import Path

import numpy as np
import torch

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.attention.cross_attention import AttnWeights, attend, cross_attention, CrossAttentionLayer
from src.attention.text_slice import (
    AttnStack,
    TextAttentionAggregator,
    aggregate_attention,
    search_text_slice,
)
from src.attention.heatmap import normalize_map, export_heatmap, dump_layer_heatmaps
from src.utils.errors import DomainError, ParameterError, ShapeError


def _stack(sizes=((2, 2), (4, 4)), tokens=4, tex_index=3) -> AttnStack:
    gen = torch.Generator().manual_seed(0)
    stack = AttnStack(tex_index=tex_index)
    for h, w in sizes:
        stack.record(torch.randn(1, h * w, tokens, generator=gen), (h, w))
    return stack


class TestCrossAttention(unittest.TestCase):
    """Scaled dot-product attention with raw score reporting."""

    def test_matches_manual_softmax(self):
        torch.manual_seed(0)
        z = torch.randn(2, 6, 8)
        c_y = torch.randn(4, 5)
        w = AttnWeights(W_q=torch.randn(8, 8), W_k=torch.randn(8, 5), W_v=torch.randn(8, 5))
        out, raw = cross_attention(z, c_y, w)

        q, k, v = z @ w.W_q.T, c_y @ w.W_k.T, c_y @ w.W_v.T
        scores = q @ k.T
        expected = torch.softmax(scores / math.sqrt(8), dim=-1) @ v
        torch.testing.assert_close(raw, scores)
        torch.testing.assert_close(out, expected)

    def test_softmax_rows_sum_to_one(self):
        torch.manual_seed(1)
        q, k = torch.randn(2, 5, 4), torch.randn(2, 4, 4)
        v = torch.eye(4).expand(2, 4, 4)
        weights, _ = attend(q, k, v)
        torch.testing.assert_close(weights.sum(dim=-1), torch.ones(2, 5))
        self.assertGreaterEqual(weights.min().item(), 0.0)

    def test_single_token_prompt(self):
        torch.manual_seed(2)
        v = torch.randn(1, 1, 6)
        out, raw = attend(torch.randn(1, 7, 6), torch.randn(1, 1, 6), v)
        torch.testing.assert_close(out, v.expand(1, 7, 6))
        self.assertEqual(tuple(raw.shape), (1, 7, 1))

    def test_head_split(self):
        q = torch.randn(1, 3, 8)
        out, raw = attend(q, torch.randn(1, 4, 8), torch.randn(1, 4, 8), heads=2)
        self.assertEqual(tuple(out.shape), (1, 3, 8))
        self.assertEqual(tuple(raw.shape), (1, 3, 4))
        with self.assertRaises(ParameterError):
            attend(q, torch.randn(1, 4, 8), torch.randn(1, 4, 8), heads=3)

    def test_shape_checks(self):
        w = AttnWeights(W_q=torch.randn(8, 8), W_k=torch.randn(8, 5), W_v=torch.randn(8, 5))
        with self.assertRaises(ShapeError):
            cross_attention(torch.randn(2, 6, 7), torch.randn(4, 5), w)
        with self.assertRaises(ShapeError):
            cross_attention(torch.randn(2, 6, 8), torch.randn(4, 6), w)

    def test_layer_is_residual(self):
        layer = CrossAttentionLayer(8, 5)
        x = torch.randn(1, 8, 3, 3)
        out, scores = layer(x, torch.randn(4, 5))
        self.assertEqual(out.shape, x.shape)
        self.assertEqual(tuple(scores.shape), (1, 9, 4))


class TestTextSlice(unittest.TestCase):
    """Keyword column extraction."""

    def test_column_reshaped(self):
        a = torch.arange(24, dtype=torch.float32).reshape(6, 4)
        m = search_text_slice(a, 1, (2, 3))
        expected = torch.tensor([[1.0, 5.0, 9.0], [13.0, 17.0, 21.0]])
        torch.testing.assert_close(m, expected)

    def test_matches_pixel_loop(self):
        gen = torch.Generator().manual_seed(3)
        for h, w, l in ((2, 3, 4), (4, 4, 1), (5, 2, 6)):
            a = torch.randn(h * w, l, generator=gen)
            for i in range(l):
                expected = torch.empty(h, w)
                for n in range(h * w):
                    expected[n // w, n % w] = a[n, i]
                self.assertTrue(torch.equal(search_text_slice(a, i, (h, w)), expected))

    def test_batched(self):
        a = torch.randn(2, 6, 4)
        self.assertEqual(tuple(search_text_slice(a, 0, (3, 2)).shape), (2, 3, 2))

    def test_errors(self):
        a = torch.randn(6, 4)
        with self.assertRaises(ParameterError):
            search_text_slice(a, 4, (2, 3))
        with self.assertRaises(ShapeError):
            search_text_slice(a, 0, (2, 2))

    def test_extract_fills_maps(self):
        stack = _stack()
        maps = stack.extract(3)
        self.assertEqual([tuple(m.shape) for m in maps], [(1, 2, 2), (1, 4, 4)])


class TestAggregation(unittest.TestCase):
    """Resize, stack and project keyword maps."""

    def test_constant_maps(self):
        maps = [torch.full((2, 2), 1.0), torch.full((4, 4), 3.0)]
        W_a = torch.tensor([[1.0, 0.0], [0.5, 0.5], [0.0, 2.0]])
        out = aggregate_attention(maps, (4, 4), W_a)
        self.assertEqual(tuple(out.shape), (1, 3, 4, 4))
        torch.testing.assert_close(out[0, :, 0, 0], torch.tensor([1.0, 2.0, 6.0]))
        torch.testing.assert_close(out[0, 1], torch.full((4, 4), 2.0))

    def test_linear_in_maps(self):
        gen = torch.Generator().manual_seed(4)
        sizes = ((2, 2), (4, 4), (8, 8))
        X = [torch.randn(1, h, w, generator=gen, dtype=torch.float64) for h, w in sizes]
        Y = [torch.randn(1, h, w, generator=gen, dtype=torch.float64) for h, w in sizes]
        W_a = torch.randn(5, 3, generator=gen, dtype=torch.float64)
        alpha, beta = 0.7, -1.3
        mixed = aggregate_attention([alpha * x + beta * y for x, y in zip(X, Y)], (8, 8), W_a)
        separate = alpha * aggregate_attention(X, (8, 8), W_a) + beta * aggregate_attention(Y, (8, 8), W_a)
        torch.testing.assert_close(mixed, separate)

    def test_errors(self):
        with self.assertRaises(ParameterError):
            aggregate_attention([], (4, 4), torch.ones(1, 0))
        with self.assertRaises(ShapeError):
            aggregate_attention([torch.ones(2, 2)], (4, 4), torch.ones(3, 2))

    def test_aggregator_module(self):
        stack = _stack()
        aggregator = TextAttentionAggregator(num_layers=2, out_channels=5)
        out = aggregator(stack, 3, (4, 4))
        self.assertEqual(tuple(out.shape), (1, 5, 4, 4))
        self.assertIs(stack.aggregated, out)
        self.assertEqual(len(stack.tex_maps), 2)

    def test_constant_input(self):
        aggregator = TextAttentionAggregator(num_layers=2, out_channels=5)
        const = aggregator.constant_input(3, (4, 4))
        self.assertEqual(tuple(const.shape), (3, 5, 4, 4))
        self.assertEqual(const.abs().max().item(), 0.0)


class TestHeatmap(unittest.TestCase):
    """Normalization, overlay and per-layer dumps."""

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def test_normalize(self):
        out = normalize_map(np.array([[1.0, 3.0], [2.0, 5.0]]))
        self.assertEqual(out.min(), 0.0)
        self.assertEqual(out.max(), 1.0)
        np.testing.assert_array_equal(normalize_map(np.full((3, 3), 7.0)), np.full((3, 3), 0.5))

    def test_normalize_rejects_nan(self):
        with self.assertRaises(DomainError):
            normalize_map(np.array([[np.nan, 1.0]]))

    def test_export_shape_and_range(self):
        underlay = np.random.default_rng(0).random((16, 16, 3)).astype(np.float32)
        heat = export_heatmap(torch.randn(4, 4), underlay)
        self.assertEqual(heat.shape, (16, 16, 3))
        self.assertGreaterEqual(heat.min(), 0.0)
        self.assertLessEqual(heat.max(), 1.0)

    def test_hot_pixel_is_overlay_maximum(self):
        attn = np.zeros((8, 8))
        attn[2, 5] = 1.0
        heat = export_heatmap(attn, np.zeros((8, 8, 3)))
        self.assertEqual(np.unravel_index(np.argmax(heat[..., 0]), (8, 8)), (2, 5))

    def test_constant_map_is_uniform_overlay(self):
        heat = export_heatmap(np.full((16, 16), 2.5), np.full((16, 16, 3), 0.3))
        np.testing.assert_array_equal(heat, np.broadcast_to(heat[0, 0], heat.shape))

    def test_export_rejects_3d(self):
        with self.assertRaises(ShapeError):
            export_heatmap(np.zeros((2, 4, 4)), np.zeros((8, 8, 3)))

    def test_dump_layer_heatmaps(self):
        stack = _stack()
        TextAttentionAggregator(2, 3)(stack, 3, (4, 4))
        index_path = dump_layer_heatmaps(stack, np.zeros((16, 16, 3)), self.tmpdir)
        with open(index_path) as f:
            index = json.load(f)
        self.assertEqual(index['num_layers'], 2)
        self.assertEqual(index['tex_index'], 3)
        self.assertEqual(index['aggregated'], 'aggregated.png')
        for entry in index['layers']:
            self.assertTrue((Path(self.tmpdir) / entry['file']).exists())
        self.assertEqual((index['layers'][1]['height'], index['layers'][1]['width']), (4, 4))

    def test_dump_without_keyword_index(self):
        stack = _stack(tex_index=None)
        with self.assertRaises(DomainError):
            dump_layer_heatmaps(stack, np.zeros((8, 8, 3)), self.tmpdir)


if __name__ == '__main__':
    unittest.main()
