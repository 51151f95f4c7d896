import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plateflow.assembly import build_bases, assemble  # noqa: E402
from plateflow.config import RunConfig  # noqa: E402
from plateflow.plate_modes import zero_mean_eigenmodes  # noqa: E402


@pytest.fixture(scope="session")
def config():
    return RunConfig()


@pytest.fixture(scope="session")
def bases(config):
    return build_bases(config)


@pytest.fixture(scope="session")
def system(bases, config):
    return assemble(bases.plate, bases.flow, bases.stream, bases.ext, config.forcing)


@pytest.fixture(scope="session")
def plate():
    return zero_mean_eigenmodes(8, 0.0, 1.0, n_raw=64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
