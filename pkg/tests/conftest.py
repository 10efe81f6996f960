import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from specalign.dataio import PipelineConfig, sample_anchors
from specalign.pipeline import embedding_basis
from specalign.synth import gen_base_cloud, gen_pair

# synthetic clouds routinely fragment at small k; the warning is expected
warnings.filterwarnings("ignore", message="kNN graph has")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cloud():
    """200-point swiss roll used by most graph/spectral tests."""
    return gen_base_cloud(200, 6, "swiss_roll", seed=7)


@pytest.fixture(scope="session")
def small_basis(small_cloud):
    return embedding_basis(small_cloud, knn_k=10, k_dim=20)


@pytest.fixture(scope="session")
def identical_pair_bases():
    """Identical 300-point pair with bases at dimension 40."""
    base = gen_base_cloud(300, 8, "swiss_roll", seed=3)
    pair = gen_pair(base, "identical", seed=3)
    bsrc = embedding_basis(pair.source, knn_k=12, k_dim=40)
    btgt = embedding_basis(pair.target, knn_k=12, k_dim=40)
    return pair, bsrc, btgt


@pytest.fixture
def default_config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def anchors_20():
    return sample_anchors(300, 20, seed=5)
