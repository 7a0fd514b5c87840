"""
Tests for the full network, the training loop, checkpoints and inference.
"""
import json
import os
import tempfile
import unittest
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.backbone.unet import UNetConfig
from src.decoders.joint_decoder import DecoderConfig
from src.losses.objective import LossBreakdown
from src.synthesis.dataset import SynthConfig, generate_dataset, load_triplet, read_manifest
from src.training.checkpoint import checkpoint_name, load_checkpoint, read_checkpoint
from src.training.data import TripletDataset, make_loader
from src.training.inference import attention_dump, infer, predict_split
from src.training.model import ModelConfig, TextAwareSR, count_parameters
from src.training.trainer import METRICS_FILE, TrainConfig, Trainer
from src.evaluation.evaluate import evaluate_directory
from src.utils.errors import DatasetIOError, ParameterError, ShapeError, TrainingDivergedError
from src.utils.logger import RUN_LOG

RUN_SLOW = os.environ.get('TEXTSR_RUN_SLOW') == '1'


def small_model_config() -> ModelConfig:
    return ModelConfig(
        unet=UNetConfig(base_channels=8, num_resolutions=2, cross_attn_layers=2, attn_heads=1,
                        latent_channels=4, downsample=4, context_dim=8, channel_mult=(1, 2)),
        decoder=DecoderConfig(latent_channels=4, attn_channels=4, channels=(8, 8), upsample=(2, 2)),
        encoder_channels=8,
    )


class TrainingTestCase(unittest.TestCase):
    """Shared tiny dataset"""

    @classmethod
    def setUpClass(cls):
        cls.tmpdir = Path(tempfile.mkdtemp())
        cls.data = cls.tmpdir / 'data'
        generate_dataset(3, SynthConfig(train_fraction=1.0, workers=1), root_seed=0,
                         out_dir=cls.data, progress=False)

    def run_config(self, name: str, **overrides) -> TrainConfig:
        settings = dict(max_steps=2, checkpoint_interval=2, log_interval=1, seed=0,
                        data_root=str(self.data), out_dir=str(self.tmpdir / name))
        settings.update(overrides)
        return TrainConfig(**settings)

    def trainer(self, name: str, **overrides) -> Trainer:
        return Trainer(self.run_config(name, **overrides), small_model_config(), progress=False)


class TestModel(unittest.TestCase):
    """Network wiring and configuration."""

    def setUp(self):
        torch.manual_seed(0)
        self.model = TextAwareSR(small_model_config())

    def test_output_shapes(self):
        out = self.model(torch.rand(2, 3, 16, 16))
        self.assertEqual(tuple(out.x_hat.shape), (2, 3, 64, 64))
        self.assertEqual(tuple(out.s_hat.shape), (2, 1, 64, 64))
        self.assertEqual(tuple(out.a_tex.shape), (2, 4, 16, 16))
        self.assertEqual(len(out.attn), 2)

    def test_rejects_bad_input(self):
        with self.assertRaises(ShapeError):
            self.model(torch.rand(1, 1, 16, 16))

    def test_config_validation(self):
        cfg = small_model_config()
        with self.assertRaises(ParameterError):
            replace(cfg, decoder=DecoderConfig(latent_channels=16, attn_channels=4, channels=(8, 8), upsample=(2, 2)))
        with self.assertRaises(ParameterError):
            replace(cfg, decoder=DecoderConfig(latent_channels=4, attn_channels=4, channels=(8,), upsample=(2,)))

    def test_ablation_flags(self):
        model = TextAwareSR(small_model_config(), use_taca=False, use_jsd=False)
        self.assertFalse(model.aggregator.W_a.requires_grad)
        for block in model.decoder.interactions:
            self.assertFalse(any(s.requires_grad for s in block.residual_scales))
        counts = count_parameters(model)
        self.assertLess(counts['trainable'], counts['total'])


class TestTrainer(TrainingTestCase):
    """Short training runs."""

    def test_smoke_run(self):
        result = self.trainer('smoke').train()
        lines = (self.tmpdir / 'smoke' / METRICS_FILE).read_text().splitlines()
        self.assertEqual(len(lines), 2)
        rows = [json.loads(line) for line in lines]
        self.assertEqual([r['step'] for r in rows], [0, 1])
        self.assertEqual(set(rows[0]), {'step', 'loss_total', 'loss_img', 'loss_seg', 'loss_mf'})
        self.assertTrue(all(np.isfinite(r['loss_total']) for r in rows))

        self.assertEqual(result.checkpoint.name, checkpoint_name(2))
        self.assertEqual(len(list((self.tmpdir / 'smoke').glob('checkpoint_*.pt'))), 1)
        with open(result.checkpoint.with_suffix('.json')) as f:
            self.assertEqual(json.load(f)['step'], 2)

    def test_same_seed_same_losses(self):
        a = self.trainer('seed_a').train()
        b = self.trainer('seed_b').train()
        self.assertEqual(a.losses, b.losses)

    def test_without_edge_loss(self):
        result = self.trainer('no_mf', use_mf_loss=False).train()
        self.assertTrue(all(row['loss_mf'] == 0.0 for row in result.history))

    def test_without_keyword_attention(self):
        trainer = self.trainer('no_taca', use_taca=False)
        trainer.train()
        with torch.no_grad():
            out = trainer.model(torch.rand(1, 3, 16, 16))
        expected = trainer.model.aggregator.constant.expand_as(out.a_tex)
        self.assertTrue(torch.equal(out.a_tex, expected))

    def test_without_joint_decoding(self):
        trainer = self.trainer('no_jsd', use_jsd=False)
        trainer.train()
        for block in trainer.model.decoder.interactions:
            self.assertEqual([s.item() for s in block.residual_scales], [0.0, 0.0])

    def test_divergence_dumps_batch(self):
        trainer = self.trainer('diverge')
        step = trainer.step

        def poisoned(batch):
            b = step(batch)
            return LossBreakdown(total=b.total * float('nan'), img=b.img, seg=b.seg, mf=b.mf)

        trainer.step = poisoned
        with self.assertRaises(TrainingDivergedError):
            trainer.train()
        dump = torch.load(self.tmpdir / 'diverge' / 'nan_dump_step0.pt', weights_only=False)
        self.assertEqual(dump['step'], 0)
        self.assertEqual(tuple(dump['x_L'].shape[1:]), (3, 16, 16))

    def test_config_from_dict(self):
        cfg = TrainConfig.from_config({'max_steps': 7, 'ablation': {'use_jsd': False}})
        self.assertEqual(cfg.max_steps, 7)
        self.assertFalse(cfg.use_jsd)
        self.assertTrue(cfg.use_taca)
        with self.assertRaises(ParameterError):
            TrainConfig(max_steps=0)


@unittest.skipUnless(RUN_SLOW, "set TEXTSR_RUN_SLOW=1 for the 2000-step run")
class TestDeskScaleRun(unittest.TestCase):
    """200 training triplets, 2000 steps, scored on 20 held-out samples."""

    def test_beats_bicubic(self):
        tmpdir = Path(tempfile.mkdtemp())
        data = tmpdir / 'data'
        generate_dataset(220, SynthConfig(train_fraction=200 / 220), root_seed=0, out_dir=data, progress=False)

        cfg = TrainConfig(data_root=str(data), out_dir=str(tmpdir / 'run'), max_steps=2000)
        result = Trainer(cfg, progress=False).train()
        self.assertLessEqual(np.mean(result.losses[-50:]), 0.5 * result.losses[0])

        pred = predict_split(result.checkpoint, data, tmpdir / 'pred', split='test', progress=False)
        model = evaluate_directory(data, tmpdir / 'eval_model', pred_dir=pred, progress=False)
        bicubic = evaluate_directory(data, tmpdir / 'eval_bicubic', baseline=True, progress=False)
        self.assertEqual(model.n_samples, 20)
        self.assertGreaterEqual(model.psnr - bicubic.psnr, 0.5)
        self.assertGreaterEqual(model.iou, 0.5)


class TestData(TrainingTestCase):
    """Torch dataset view."""

    def test_items(self):
        dataset = TripletDataset(self.data, 'train')
        self.assertEqual(len(dataset), 3)
        item = dataset[0]
        self.assertEqual(tuple(item['x_L'].shape), (3, 16, 16))
        self.assertEqual(tuple(item['s'].shape), (1, 64, 64))

    def test_loader_order_depends_on_seed(self):
        dataset = TripletDataset(self.data, 'train')
        first = [b['id'] for b in make_loader(dataset, seed=4)]
        second = [b['id'] for b in make_loader(dataset, seed=4)]
        self.assertEqual(first, second)

    def test_empty_split(self):
        with self.assertRaises(DatasetIOError):
            TripletDataset(self.data, 'test')


class TestCheckpointAndInference(TrainingTestCase):
    """Checkpoint round trip and prediction outputs."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cfg = TrainConfig(max_steps=1, checkpoint_interval=1, data_root=str(cls.data),
                          out_dir=str(cls.tmpdir / 'ckpt'))
        cls.result_trainer = Trainer(cfg, small_model_config(), config_hash='feedbeef0000', progress=False)
        cls.checkpoint = cls.result_trainer.train().checkpoint
        cls.x_L = load_triplet(cls.data, read_manifest(cls.data)['samples'][0]).x_L

    def test_round_trip_is_bitwise(self):
        model, header = load_checkpoint(self.checkpoint)
        self.assertEqual(header['config_hash'], 'feedbeef0000')
        self.assertEqual(header['step'], 1)
        self.assertTrue((self.tmpdir / 'ckpt' / RUN_LOG).exists())
        original = infer(self.result_trainer.model, self.x_L)
        restored = infer(model, self.x_L)
        np.testing.assert_array_equal(original.x_hat, restored.x_hat)
        np.testing.assert_array_equal(original.s_hat, restored.s_hat)

    def test_infer_outputs(self):
        result = infer(self.checkpoint, self.x_L, heatmaps=True)
        self.assertEqual(result.x_hat.shape, (64, 64, 3))
        self.assertEqual(result.s_hat.shape, (64, 64))
        self.assertGreaterEqual(result.s_hat.min(), 0.0)
        self.assertLessEqual(result.s_hat.max(), 1.0)
        self.assertEqual(result.heatmap.shape, (64, 64, 3))
        with self.assertRaises(ShapeError):
            infer(self.checkpoint, self.x_L[..., 0])

    def test_predict_split(self):
        out = predict_split(self.checkpoint, self.data, self.tmpdir / 'pred', split=None, progress=False)
        self.assertEqual(len(list((out / 'sr').glob('*.png'))), 3)
        self.assertEqual(len(list((out / 'mask').glob('*.png'))), 3)

    def test_attention_dump(self):
        index_path = attention_dump(self.checkpoint, self.x_L, self.tmpdir / 'attn')
        with open(index_path) as f:
            index = json.load(f)
        self.assertEqual(index['num_layers'], 2)

    def test_missing_checkpoint(self):
        with self.assertRaises(DatasetIOError):
            read_checkpoint(self.tmpdir / 'absent.pt')


if __name__ == '__main__':
    unittest.main()
