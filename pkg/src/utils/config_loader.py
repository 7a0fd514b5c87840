"""
Configuration loader for TextSR
"""
import copy
import hashlib
import json
import os
import yaml
from pathlib import Path
from dotenv import load_dotenv
from typing import Dict, Any, Optional, Union

from .errors import DatasetIOError, ParameterError


class Config:
    """Configuration manager for the application"""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict] = None):
        """
        Initialize configuration

        Args:
            config_path: Path to config.yaml file
            overrides: Nested or dotted-key dict merged over the file contents
        """
        # Load environment variables
        load_dotenv()

        self.base_dir = Path(__file__).parent.parent.parent
        if config_path is None:
            config_path = self.base_dir / "config" / "config.yaml"
        self.config_path = Path(config_path)

        self.config = self._read(self.config_path)
        self.config = self._replace_env_vars(self.config)

        if overrides:
            self.update(overrides)

    @staticmethod
    def _read(path: Path) -> Dict:
        """Read a YAML (or JSON, which is a YAML subset) document"""
        try:
            with open(path, 'r') as f:
                data = yaml.safe_load(f)
        except FileNotFoundError as exc:
            raise DatasetIOError(f"Config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ParameterError(f"Config file {path} is not valid YAML/JSON: {exc}") from exc
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ParameterError(f"Config file {path} must contain a mapping at top level")
        return data

    def _replace_env_vars(self, obj: Any) -> Any:
        """
        Recursively replace ${ENV_VAR} patterns with environment variables

        Args:
            obj: Object to process (dict, list, str, or other)

        Returns:
            Processed object
        """
        if isinstance(obj, dict):
            return {k: self._replace_env_vars(v) for k, v in obj.items()}
        elif isinstance(obj, list):
            return [self._replace_env_vars(item) for item in obj]
        elif isinstance(obj, str) and obj.startswith("${") and obj.endswith("}"):
            env_var = obj[2:-1]
            return os.getenv(env_var, "")
        return obj

    def update(self, overrides: Dict) -> None:
        """
        Deep-merge overrides into the configuration

        Keys may be nested dicts or dotted paths ('training.max_steps').
        """
        for key, value in overrides.items():
            target = self.config
            parts = str(key).split('.')
            for part in parts[:-1]:
                if not isinstance(target.get(part), dict):
                    target[part] = {}
                target = target[part]
            leaf = parts[-1]
            if isinstance(value, dict) and isinstance(target.get(leaf), dict):
                self._deep_merge(target[leaf], value)
            else:
                target[leaf] = copy.deepcopy(value)

    def _deep_merge(self, base: Dict, extra: Dict) -> None:
        for k, v in extra.items():
            if isinstance(v, dict) and isinstance(base.get(k), dict):
                self._deep_merge(base[k], v)
            else:
                base[k] = copy.deepcopy(v)

    def update_from_file(self, path: Union[str, Path]) -> None:
        """Merge a JSON/YAML override document (the --config flag)"""
        self.update(self._read(Path(path)))

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation

        Args:
            key: Configuration key (e.g., 'training.learning_rate')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        keys = key.split('.')
        value = self.config

        for k in keys:
            if isinstance(value, dict):
                value = value.get(k)
                if value is None:
                    return default
            else:
                return default

        return value

    def __getitem__(self, key: str) -> Any:
        """Allow dictionary-style access"""
        return self.get(key)

    def to_dict(self) -> Dict:
        """Deep copy of the merged configuration tree"""
        return copy.deepcopy(self.config)

    def config_hash(self) -> str:
        """Short stable hash of the merged configuration"""
        canonical = json.dumps(self.config, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:12]

    @property
    def data_dir(self) -> Path:
        """Get data directory path"""
        return self.base_dir / self.get('paths.data_dir', 'data')

    @property
    def runs_dir(self) -> Path:
        """Get runs directory path (checkpoints, reports)"""
        return self.base_dir / self.get('paths.runs_dir', 'runs')

    @property
    def logs_dir(self) -> Path:
        """Get logs directory path"""
        log_file = self.get('logging.log_file', 'logs/textsr.log')
        logs_path = self.base_dir / Path(log_file).parent
        logs_path.mkdir(parents=True, exist_ok=True)
        return logs_path


# Global configuration instance
_config = None


def get_config(config_path: Optional[str] = None) -> Config:
    """
    Get or create global configuration instance

    Args:
        config_path: Path to config.yaml file

    Returns:
        Config instance
    """
    global _config
    if _config is None:
        _config = Config(config_path)
    return _config


def reset_config() -> None:
    """Drop the global instance so the next get_config() reloads"""
    global _config
    _config = None
