import numpy as np
import pytest

from excursion_lab import GridSpec, KernelSpec, Rect, sample_field


@pytest.fixture(scope="session")
def bf():
    return KernelSpec.bargmann_fock()


@pytest.fixture
def rng():
    return np.random.default_rng(20240)


@pytest.fixture(scope="session")
def bf_sample(bf):
    grid = GridSpec(0.05, Rect(-4.0, -4.0, 4.0, 4.0), padding=5.0)
    return sample_field(bf, grid, 11)
