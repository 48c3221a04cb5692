"""Pytest configuration for mbsim tests."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add repo root to path for direct imports
repo_root = Path(__file__).parent.parent
if str(repo_root) not in sys.path:
    sys.path.insert(0, str(repo_root))

INSTANCES_DIR = repo_root / "instances"


@pytest.fixture
def rng():
    """A seeded numpy generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def instances_dir():
    """Directory of shipped instance files."""
    return INSTANCES_DIR
