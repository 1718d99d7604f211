import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import write_cifar_batch  # noqa: E402


@pytest.fixture(scope="session")
def cifar_dir(tmp_path_factory):
    """Small CIFAR-format directory: 60 train images, 20 test images."""
    d = tmp_path_factory.mktemp("cifar")
    write_cifar_batch(d / "train_batch.bin", 60, seed=11)
    write_cifar_batch(d / "test_batch.bin", 20, seed=12)
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
