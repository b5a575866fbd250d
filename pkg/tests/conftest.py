"""
Pytest Configuration
====================

Shared fixtures and configuration for all tests.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from otalign.config import reset_settings
from otalign.core.alignment import ReprBundle
from otalign.core.objective import CoTQuad


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Every test starts without OTALIGN_* overrides."""
    for name in ("OTALIGN_SEED", "OTALIGN_LOG_LEVEL", "OTALIGN_CACHE_DIR", "OTALIGN_MAX_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    """Seeded generator so random instances are reproducible."""
    return np.random.default_rng(1234)


@pytest.fixture
def worked_cost():
    """Cost of X = Y = identity(2): 1 - softmax(I / sqrt(2))."""
    return np.array([[0.3302, 0.6698], [0.6698, 0.3302]])


def make_bundle(rng, rows, emb_dim, hid_dim, label=""):
    return ReprBundle(rng.normal(size=(rows, emb_dim)), rng.normal(size=(rows, hid_dim)), label)


@pytest.fixture
def random_quad(rng):
    """Student (d=3/4) and teacher (D=3/4) bundles of different lengths, no projection needed."""
    return CoTQuad(
        s_raw=make_bundle(rng, 3, 3, 4, "student/raw"),
        s_cot=make_bundle(rng, 6, 3, 4, "student/cot"),
        t_raw=make_bundle(rng, 2, 3, 4, "teacher/raw"),
        t_cot=make_bundle(rng, 5, 3, 4, "teacher/cot"),
    )


@pytest.fixture
def write_json(tmp_path):
    """Write an object to a JSON file under tmp_path and return its path."""

    def _write(name, obj):
        path = Path(tmp_path) / name
        path.write_text(json.dumps(obj))
        return str(path)

    return _write


# Configure pytest markers
def pytest_configure(config):
    """Configure custom markers."""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests as integration tests"
    )
