import numpy as np
import pytest

from comboin.core import DesignParams, DoseGrid, SubsetMask

BAND_CELLS = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3), (3, 4), (4, 3), (4, 4)]
CASE_STUDY_CELLS = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 2), (3, 3), (3, 4), (4, 4)]


@pytest.fixture
def grid():
    return DoseGrid((15, 25, 50, 75), (120, 160, 200, 240))


@pytest.fixture
def full_mask(grid):
    return SubsetMask.full(grid)


@pytest.fixture
def band_mask(grid):
    return SubsetMask.from_cells(grid, BAND_CELLS)


@pytest.fixture
def case_mask(grid):
    return SubsetMask.from_cells(grid, CASE_STUDY_CELLS)


@pytest.fixture
def params():
    return DesignParams.from_target(0.30)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
