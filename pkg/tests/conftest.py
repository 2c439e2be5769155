"""Shared fixtures and the --runslow switch for acceptance-scale tests."""

from __future__ import annotations

from typing import List

import numpy as np
import pytest

from model.cnn import Cnn8by8, build_cnn8by8
from model.linear import LinearProbe
from model.train import TrainConfig, train
from tris.scenarios import Sample, ScenarioSpec, generate_dataset


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run full-scale training/evaluation tests")


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: full-scale run, skipped unless --runslow")


def pytest_collection_modifyitems(config: pytest.Config, items: List[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def cnn() -> Cnn8by8:
    return build_cnn8by8(seed=3)


@pytest.fixture
def pixel_weights() -> np.ndarray:
    return np.random.default_rng(5).standard_normal(64)


@pytest.fixture
def probe(pixel_weights: np.ndarray) -> LinearProbe:
    return LinearProbe.from_pixel_weights(pixel_weights)


@pytest.fixture(scope="session")
def linear_small() -> List[Sample]:
    return generate_dataset(ScenarioSpec("linear", "uncorrelated", n=64, seed=11))


@pytest.fixture(scope="session")
def linear_small_test() -> List[Sample]:
    return generate_dataset(ScenarioSpec("linear", "uncorrelated", n=32, seed=12, split="test"))


@pytest.fixture(scope="session")
def briefly_trained(linear_small: List[Sample], linear_small_test: List[Sample]) -> Cnn8by8:
    """A CNN after a couple of epochs: not accurate, but no longer at its init."""
    model = build_cnn8by8(seed=7)
    train(model, linear_small, linear_small_test,
          TrainConfig(epochs=2, lr0=1e-2, batch_size=16, seed=7))
    return model
