import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oclbcp.color_mapping import build_distance_matrix, build_palette  # noqa: E402


@pytest.fixture(scope="session")
def palette():
    return build_palette()


@pytest.fixture(scope="session")
def distance_matrix():
    return build_distance_matrix()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
