import numpy as np
import pytest

import convae
from convae.nets import net_path

from corpus import build_corpus, find_mnist


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running desk-scale training tests")


@pytest.fixture(scope="session")
def corpus_paths(tmp_path_factory):
    """Small synthetic IDX quartet shared across the suite."""
    return build_corpus(tmp_path_factory.mktemp("corpus"), train_count=600, test_count=120)


@pytest.fixture(scope="session")
def train_handle(corpus_paths):
    return convae.load_idx(corpus_paths["train_images"], corpus_paths["train_labels"], split="train")


@pytest.fixture(scope="session")
def test_handle(corpus_paths):
    return convae.load_idx(corpus_paths["test_images"], corpus_paths["test_labels"], split="test")


@pytest.fixture(scope="session")
def mnist_paths():
    found = find_mnist()
    if found is None:
        pytest.skip(
            "canonical MNIST IDX files not available (set CONVAE_MNIST_DIR or run "
            "scripts/fetch_mnist.py; this sandbox has no dataset network access)"
        )
    return found


@pytest.fixture(scope="session")
def model1_net():
    net = convae.parse_netspec(net_path("model1").read_text())
    convae.infer_shapes(net)
    return net


@pytest.fixture(scope="session")
def model2_net():
    net = convae.parse_netspec(net_path("model2").read_text())
    convae.infer_shapes(net)
    return net


@pytest.fixture()
def rng():
    return np.random.default_rng(20240901)
