import sys
from pathlib import Path

import pytest
import torch

# allow `import oracles` from any test module
sys.path.insert(0, str(Path(__file__).parent))

from fourllie.data import synth_tiny_dataset  # noqa: E402


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)
    yield


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Session-wide 8-pair synthetic 64x64 dataset."""
    root = tmp_path_factory.mktemp("synth")
    return synth_tiny_dataset(8, 64, 64, rng_seed=0, root=root)
