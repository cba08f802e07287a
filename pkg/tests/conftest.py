import numpy as np
import pytest

from smecplan.energymodel import ComputeConfig
from smecplan.linkbudget import LinkConfig, RateTable
from smecplan.orbital import ConstellationConfig, ImagingConfig


@pytest.fixture(scope="session")
def link_cfg():
    return LinkConfig()


@pytest.fixture(scope="session")
def compute_cfg():
    return ComputeConfig()


@pytest.fixture(scope="session")
def constellation_cfg():
    return ConstellationConfig()


@pytest.fixture(scope="session")
def imaging_cfg():
    return ImagingConfig()


@pytest.fixture(scope="session")
def rate_table():
    return RateTable.shannon_default()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(7)
