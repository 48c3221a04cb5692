"""Configuration for the simulator.

Defaults live in ``MbsimConfig``; a YAML or JSON file can override them and
the ``MBSIM_SEED`` environment variable (optionally from a ``.env`` file)
overrides the seed last.
"""

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional

from .errors import UsageError

SEED_ENV_VAR = "MBSIM_SEED"


@dataclass
class MbsimConfig:
    """Base simulator configuration."""

    # Randomness
    default_seed: int = 42

    # Execution
    threads: int = 1
    validate_outcomes: bool = False

    # Logging settings
    log_level: str = "INFO"

    # Numerics
    grid_size: int = 4096
    sigma_slack: float = 3.0

    # Output
    schema_version: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            "default_seed": self.default_seed,
            "threads": self.threads,
            "validate_outcomes": self.validate_outcomes,
            "log_level": self.log_level,
            "grid_size": self.grid_size,
            "sigma_slack": self.sigma_slack,
            "schema_version": self.schema_version,
        }


def _load_dotenv(env_file: Optional[Path] = None) -> None:
    try:
        from dotenv import load_dotenv
    except ImportError:  # pragma: no cover - dotenv is a declared dependency
        return
    if env_file is not None:
        if env_file.exists():
            load_dotenv(env_file)
    else:
        load_dotenv()


def apply_env_overrides(config: MbsimConfig) -> MbsimConfig:
    """Apply MBSIM_SEED to ``config`` in place and return it."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return config
    try:
        seed = int(raw.strip(), 0)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc
    if seed < 0:
        raise UsageError(f"{SEED_ENV_VAR} must be non-negative, got {seed}")
    config.default_seed = seed
    return config


def get_default_config(env_file: Optional[Path] = None) -> MbsimConfig:
    """Return default configuration with environment overrides applied."""
    _load_dotenv(env_file)
    return apply_env_overrides(MbsimConfig())


def load_config_from_file(config_path: str) -> MbsimConfig:
    """Load configuration from a YAML or JSON file."""
    import json

    import yaml

    path = Path(config_path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    try:
        with open(path, encoding="utf-8") as f:
            if path.suffix in (".yaml", ".yml"):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise TypeError("top-level value must be a mapping")
        known = {f.name for f in fields(MbsimConfig)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown keys {unknown}")
        config = MbsimConfig(**data)
    except (yaml.YAMLError, json.JSONDecodeError, ValueError, TypeError) as exc:
        raise ValueError(f"Failed to load config from {config_path}: {exc}") from exc

    _load_dotenv()
    return apply_env_overrides(config)
