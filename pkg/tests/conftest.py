import numpy as np
import pytest

from ddipotfs.link.dd_frame import Constellation
from ddipotfs.sim.config import SimConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long Monte Carlo checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qpsk():
    return Constellation.square_qam(4)


@pytest.fixture
def small_config():
    """A 4x4 frame that runs every detector in well under a second."""
    return SimConfig(
        M=4,
        N=4,
        P=2,
        k_max=1,
        snr_db_list=[15.0],
        frames=2,
        T=5,
        W=5,
        ddip_cap=60,
        workers=1,
    )
