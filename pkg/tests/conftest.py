import numpy as np
import pytest

from ximl import make_synthetic_dataset, split_pools
from ximl.classifier import ModelConfig, fit


@pytest.fixture(scope="session")
def tiny_dataset():
    return make_synthetic_dataset(30, seed=11)


@pytest.fixture(scope="session")
def tiny_pools(tiny_dataset):
    return split_pools(tiny_dataset, seed=5, l0_size=12, test_size=20, expl_test_size=6)


@pytest.fixture(scope="session")
def fast_model_config():
    return ModelConfig(epochs=2, seed=3)


@pytest.fixture(scope="session")
def trained_model(tiny_pools, fast_model_config):
    return fit(tiny_pools.labeled, fast_model_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
