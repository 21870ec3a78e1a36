import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def out_root(tmp_path):
    """A fresh output root for CLI runs."""
    root = tmp_path / "runs"
    root.mkdir()
    return root
