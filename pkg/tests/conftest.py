# tests/conftest.py
import numpy as np
import pytest
import torch

from src.geometry.point_cloud import ManifoldKind, PointCloud, sample_cloud, sample_grid
from src.network.deeponet import DeepONet, ModelConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def torus_cloud():
    return sample_cloud(ManifoldKind.TORUS, 300, seed=3)


@pytest.fixture(scope="session")
def torus_grid():
    return sample_grid(ManifoldKind.TORUS, 20, 20)


@pytest.fixture(scope="session")
def small_grid():
    return sample_grid(ManifoldKind.TORUS, 10, 10)


@pytest.fixture(scope="session")
def semi_torus_cloud():
    return sample_cloud(ManifoldKind.SEMI_TORUS, 300, seed=5)


@pytest.fixture(scope="session")
def planar_patch():
    """Jittered 7x7 patch in the z = 0 plane with the origin as point 0."""
    rng = np.random.default_rng(11)
    ticks = np.linspace(-1.0, 1.0, 7)
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    grid = np.column_stack([xx.ravel(), yy.ravel()])
    grid = grid[np.any(grid != 0.0, axis=1)]
    grid = grid + rng.uniform(-0.05, 0.05, size=grid.shape)
    xy = np.vstack([[0.0, 0.0], grid])
    points = np.column_stack([xy, np.zeros(xy.shape[0])])
    return PointCloud(points=points, intrinsic=None, kind=ManifoldKind.CUSTOM, R=2.0, r=1.0)


@pytest.fixture
def tiny_model():
    return DeepONet(ModelConfig(m=6, p=4, branch_widths=[8], trunk_width=8, trunk_depth=2, seed=0))


def constant_model(m: int, value: float) -> DeepONet:
    """A DeepONet whose branch output is zero, so every prediction equals b0."""
    model = DeepONet(ModelConfig(m=m, p=4, branch_widths=[8], trunk_width=8, trunk_depth=2, seed=0))
    last = model.branch.network[-1]
    with torch.no_grad():
        last.weight.zero_()
        last.bias.zero_()
        model.b0.fill_(value)
    return model


@pytest.fixture
def make_constant_model():
    return constant_model
