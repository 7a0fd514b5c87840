"""
Unit tests for the configuration loader, logger and error hierarchy
"""
import json
import logging
import os
import tempfile
import unittest
import sys
from pathlib import Path
from unittest import mock

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.utils.config_loader import Config, get_config, reset_config
from src.utils.errors import (
    DatasetIOError,
    DomainError,
    MetadataError,
    ParameterError,
    PromptError,
    ShapeError,
    SingularScheduleError,
    TextSRError,
    TrainingDivergedError,
)
from src.utils.logger import RUN_LOG, attach_run_log, detach_run_log, get_logger, setup_logger


class TestConfig(unittest.TestCase):
    """YAML loading, overrides and hashing."""

    def setUp(self):
        self.tmpdir = Path(tempfile.mkdtemp())
        self.path = self.tmpdir / 'config.yaml'
        self.path.write_text(
            "training:\n"
            "  max_steps: 10\n"
            "  ablation:\n"
            "    use_jsd: true\n"
            "synthesis:\n"
            "  background_dir: \"${TEXTSR_TEST_BACKGROUNDS}\"\n"
        )

    def test_dotted_get(self):
        config = Config(str(self.path))
        self.assertEqual(config.get('training.max_steps'), 10)
        self.assertTrue(config['training.ablation.use_jsd'])
        self.assertEqual(config.get('training.missing', 'x'), 'x')
        self.assertEqual(config.get('training.max_steps.deeper', 3), 3)

    def test_env_substitution(self):
        with mock.patch.dict(os.environ, {'TEXTSR_TEST_BACKGROUNDS': '/photos'}):
            config = Config(str(self.path))
        self.assertEqual(config.get('synthesis.background_dir'), '/photos')

    def test_nested_and_dotted_updates(self):
        config = Config(str(self.path))
        config.update({'training': {'ablation': {'use_taca': False}}})
        config.update({'training.max_steps': 3, 'evaluation.split': 'train'})
        self.assertEqual(config.get('training.max_steps'), 3)
        self.assertTrue(config.get('training.ablation.use_jsd'))
        self.assertFalse(config.get('training.ablation.use_taca'))
        self.assertEqual(config.get('evaluation.split'), 'train')

    def test_hash_tracks_contents(self):
        a = Config(str(self.path))
        b = Config(str(self.path))
        self.assertEqual(a.config_hash(), b.config_hash())
        self.assertRegex(a.config_hash(), r'^[0-9a-f]{12}$')
        b.update({'training.max_steps': 11})
        self.assertNotEqual(a.config_hash(), b.config_hash())

    def test_update_from_json_file(self):
        override = self.tmpdir / 'override.json'
        override.write_text(json.dumps({'training': {'max_steps': 2}}))
        config = Config(str(self.path))
        config.update_from_file(override)
        self.assertEqual(config.get('training.max_steps'), 2)
        self.assertEqual(config.to_dict()['training']['ablation'], {'use_jsd': True})

    def test_bad_files(self):
        with self.assertRaises(DatasetIOError):
            Config(str(self.tmpdir / 'absent.yaml'))
        broken = self.tmpdir / 'broken.yaml'
        broken.write_text("training: [unclosed\n")
        with self.assertRaises(ParameterError):
            Config(str(broken))
        listing = self.tmpdir / 'list.yaml'
        listing.write_text("- a\n- b\n")
        with self.assertRaises(ParameterError):
            Config(str(listing))

    def test_repository_config(self):
        reset_config()
        config = get_config()
        self.assertIs(get_config(), config)
        self.assertEqual(config.get('model.prompt'), ['a', 'photo', 'with', 'text'])
        self.assertEqual(config.get('schedule.t_fixed'), 200)
        self.assertEqual(config.runs_dir, config.base_dir / 'runs')
        reset_config()
        self.assertIsNot(get_config(), config)
        reset_config()


class TestLogger(unittest.TestCase):
    """Logger setup."""

    def test_file_handler(self):
        log_file = Path(tempfile.mkdtemp()) / 'logs' / 'test.log'
        logger = setup_logger('textsr_test', log_file=str(log_file), level='DEBUG', log_to_console=False)
        logger.debug('hello')
        for handler in logger.handlers:
            handler.flush()
        self.assertIn('hello', log_file.read_text())
        self.assertEqual(logger.level, logging.DEBUG)
        self.assertIs(get_logger('textsr_test'), logger)

    def test_lines_carry_config_hash(self):
        log_file = Path(tempfile.mkdtemp()) / 'hashed.log'
        logger = setup_logger('textsr_hash', log_file=str(log_file), log_to_console=False, config_hash='abc123def456')
        logger.info('started')
        for handler in logger.handlers:
            handler.flush()
        self.assertIn('[abc123def456] - INFO - started', log_file.read_text())

    def test_run_log_follows_one_run(self):
        run_dir = Path(tempfile.mkdtemp()) / 'run'
        logger = setup_logger('textsr_run', level='INFO', log_to_console=False)
        logger.info('before')
        handler = attach_run_log(run_dir, 'feedbeef0000', name='textsr_run')
        logger.info('during')
        detach_run_log(handler, name='textsr_run')
        logger.info('after')
        text = (run_dir / RUN_LOG).read_text()
        self.assertIn('[feedbeef0000] - INFO - during', text)
        self.assertNotIn('before', text)
        self.assertNotIn('after', text)
        self.assertNotIn(handler, logger.handlers)


class TestErrors(unittest.TestCase):
    """Every error maps onto a builtin."""

    def test_hierarchy(self):
        pairs = [
            (ParameterError, ValueError),
            (ShapeError, ValueError),
            (PromptError, ParameterError),
            (DomainError, ValueError),
            (SingularScheduleError, ArithmeticError),
            (MetadataError, ValueError),
            (DatasetIOError, OSError),
            (TrainingDivergedError, RuntimeError),
        ]
        for cls, builtin in pairs:
            self.assertTrue(issubclass(cls, TextSRError), cls)
            self.assertTrue(issubclass(cls, builtin), cls)


if __name__ == '__main__':
    unittest.main()
