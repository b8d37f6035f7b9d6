# tests/conftest.py

import pytest

from resonant_cr.envelope import Envelope
from resonant_cr.experiment_manager import ExperimentManager
from resonant_cr.kernel import KernelConfig
from resonant_cr.schemas import RunOptions


@pytest.fixture
def experiment_manager():
    """A fresh serial ExperimentManager for each test."""
    return ExperimentManager(threads=1, serial=True)


@pytest.fixture
def threaded_manager():
    return ExperimentManager(threads=4, serial=False)


@pytest.fixture
def results_dir(tmp_path):
    """Base results directory isolated per test."""
    path = tmp_path / "results"
    path.mkdir()
    return str(path)


@pytest.fixture
def run_options(results_dir):
    return RunOptions(seed=7, threads=1, serial=True, out=results_dir)


@pytest.fixture(scope="session")
def kernel_config():
    """Default bump (sharpness 6) with C_L = 1; building it runs two quadratures."""
    return KernelConfig()


@pytest.fixture
def gaussian_2d():
    return Envelope.gaussian(2)


@pytest.fixture
def gaussian_3d():
    return Envelope.gaussian(3)
