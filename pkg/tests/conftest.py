import pytest

from BifLab.params import HurstParams, MultiParams, TimeGrid


@pytest.fixture
def brownian():
    return HurstParams(0.5, 1.0)


@pytest.fixture
def supercritical():
    return HurstParams(0.6, 0.9)


@pytest.fixture
def critical():
    return HurstParams(0.8, 0.625)


@pytest.fixture
def unit_grid():
    return TimeGrid.uniform(1.0, 16)


@pytest.fixture
def planar():
    return MultiParams.from_lists([0.54, 0.54], [1.0, 1.0])
