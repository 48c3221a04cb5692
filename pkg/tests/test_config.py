"""Tests for configuration loading."""

import pytest

from mbsim.config import MbsimConfig, apply_env_overrides, get_default_config, load_config_from_file
from mbsim.errors import UsageError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Start every test without a seed override."""
    monkeypatch.delenv("MBSIM_SEED", raising=False)


class TestMbsimConfig:
    """Tests for MbsimConfig defaults and overrides."""

    def test_defaults(self):
        """Test default values."""
        config = get_default_config()
        assert config.default_seed == 42
        assert config.threads == 1
        assert config.grid_size == 4096
        assert config.to_dict()["schema_version"] == 1

    def test_seed_override(self, monkeypatch):
        """Test MBSIM_SEED replaces the default seed."""
        monkeypatch.setenv("MBSIM_SEED", "7")
        assert get_default_config().default_seed == 7

    def test_hex_seed(self, monkeypatch):
        """Test integer literals with a base prefix are accepted."""
        monkeypatch.setenv("MBSIM_SEED", "0x10")
        assert apply_env_overrides(MbsimConfig()).default_seed == 16

    @pytest.mark.parametrize("raw", ["abc", "-3", "1.5"])
    def test_bad_seed(self, monkeypatch, raw):
        """Test malformed or negative seeds are usage errors."""
        monkeypatch.setenv("MBSIM_SEED", raw)
        with pytest.raises(UsageError):
            get_default_config()


class TestConfigFile:
    """Tests for load_config_from_file."""

    def test_yaml(self, tmp_path):
        """Test YAML values override defaults."""
        path = tmp_path / "mbsim.yaml"
        path.write_text("threads: 4\nlog_level: DEBUG\nsigma_slack: 4.0\n")
        config = load_config_from_file(str(path))
        assert config.threads == 4
        assert config.log_level == "DEBUG"
        assert config.sigma_slack == 4.0

    def test_json_with_env(self, tmp_path, monkeypatch):
        """Test the environment seed wins over the file."""
        path = tmp_path / "mbsim.json"
        path.write_text('{"default_seed": 5}')
        monkeypatch.setenv("MBSIM_SEED", "9")
        assert load_config_from_file(str(path)).default_seed == 9

    def test_unknown_key(self, tmp_path):
        """Test unknown keys are rejected."""
        path = tmp_path / "mbsim.yaml"
        path.write_text("trials: 5\n")
        with pytest.raises(ValueError, match="Failed to load config"):
            load_config_from_file(str(path))

    def test_missing(self, tmp_path):
        """Test a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_config_from_file(str(tmp_path / "absent.yaml"))
