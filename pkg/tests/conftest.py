import pathlib

import pytest

from tandem_pricing import Exponential, MarketModel, Normal, SystemConfig, Uniform

ROOT = pathlib.Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
PRICES = tuple(range(350, 751, 50))


@pytest.fixture
def prices():
    return PRICES


@pytest.fixture
def exp_market():
    return MarketModel(3.6, Exponential(0.002), PRICES)


@pytest.fixture
def uni_market():
    return MarketModel(3.6, Uniform(0.0, 1000.0), PRICES)


@pytest.fixture
def normal_market():
    return MarketModel(3.6, Normal(500.0, 50.0), PRICES)


@pytest.fixture
def two_station():
    return SystemConfig((8.0, 8.0), (2, 0))


@pytest.fixture
def config_dir():
    return CONFIGS
