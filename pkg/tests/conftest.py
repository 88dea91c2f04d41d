import numpy as np
import pytest

from pylats.datagen import GridSpec, generate_sample


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow end-to-end tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running end-to-end run, needs --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid():
    return GridSpec((16, 16), (1.0, 1.0), 0.01, 8, 1)


@pytest.fixture
def dr_sample():
    grid = GridSpec((16, 16), (2.0, 2.0), 0.01, 12, 2)
    return generate_sample('diffusion_reaction', grid, {}, seed=3)


TINY = """[experiment]
name = tiny
seed = 1
out = {out}

[data]
pde = constant
extents = 16, 16
lengths = 1.0, 1.0
dt = 0.01
n_steps = 8
stride = 1
n_train = 2
n_test = 1

[autoencoder]
p = 8
latent = 4
channels = 4
epochs = 2
batch_size = 16

[integrator]
th = 2
d_gamma = 4
hidden = 8
residual = true
K = 2
warmup = 1
epochs = 2
window_stride = 2
batch_windows = 2
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / 'tiny.ini'
    path.write_text(TINY.format(out=tmp_path / 'run'))
    return path
