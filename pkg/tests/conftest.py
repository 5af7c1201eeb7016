import numpy as np
import pytest

from ddvm.denoiser.arch import DenoiserArch
from ddvm.denoiser.model import DenoiserModel


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long end-to-end reproduction, needs --runslow")


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
def tiny_depth_arch():
    return DenoiserArch.for_task("depth", base_width=8, levels=1, time_dim=8)


@pytest.fixture
def tiny_flow_arch():
    return DenoiserArch.for_task("flow", base_width=8, levels=1, time_dim=8)


@pytest.fixture
def tiny_depth_model(tiny_depth_arch):
    return DenoiserModel.create(tiny_depth_arch, np.random.default_rng(0))


@pytest.fixture
def tiny_flow_model(tiny_flow_arch):
    return DenoiserModel.create(tiny_flow_arch, np.random.default_rng(0))


class OracleModel:
    """
    Predicts the exact noise that turns a fixed clean target into y_t, so a
    chain driven by it lands on that target.
    """

    def __init__(self, target, schedule):
        self.target = np.asarray(target, dtype=np.float64)
        self.schedule = schedule

    @property
    def out_channels(self) -> int:
        return self.target.shape[-1]

    def predict(self, x, y_t, t, use_ema=True):
        gamma = self.schedule.gamma(float(np.asarray(t).reshape(-1)[0]))
        return (np.asarray(y_t) - np.sqrt(gamma) * self.target) / np.sqrt(1.0 - gamma)


class ZeroModel:
    def __init__(self, channels: int):
        self._channels = channels

    @property
    def out_channels(self) -> int:
        return self._channels

    def predict(self, x, y_t, t, use_ema=True):
        return np.zeros_like(np.asarray(y_t, dtype=np.float64))


@pytest.fixture
def oracle_model():
    return OracleModel


@pytest.fixture
def zero_model():
    return ZeroModel
