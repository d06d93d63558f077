import pytest

from gaitlink.dynamics import SimConfig, Terrain
from gaitlink.gaits import default_gaits, measure_gaits
from gaitlink.tensor import populate


@pytest.fixture(scope="session")
def cfg():
    return SimConfig()


@pytest.fixture(scope="session")
def terrain():
    return Terrain()


@pytest.fixture(scope="session")
def gaits(cfg):
    """Default vocabulary with limit cycles measured once per session."""
    return measure_gaits(default_gaits(), cfg)


@pytest.fixture(scope="session")
def small_tensor(cfg, gaits):
    """A quick real tensor over one pair, for plumbing tests."""
    return populate([("Trot", "Canter")], bins=4, trials=2, sigma=0.02,
                    seed=7, cfg=cfg, gaits=gaits)


@pytest.fixture(scope="session")
def scenario_tensor(cfg, gaits):
    """Covers the pairs the gap scenario queries."""
    return populate([("Canter", "Jump"), ("Jump", "Canter")], bins=4,
                    trials=1, sigma=0.02, seed=7, cfg=cfg, gaits=gaits)
