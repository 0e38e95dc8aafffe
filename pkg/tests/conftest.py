import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from heisenheat.grid import GridAnisotropyWarning, GridSpec  # noqa: E402
from heisenheat.heat import heat_kernels  # noqa: E402

KERNEL_TIMES = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0)


def quiet_grid(*args) -> GridSpec:
    """GridSpec without the anisotropy warning (boxes chosen on purpose)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridAnisotropyWarning)
        return GridSpec(*args)


@pytest.fixture(scope="session")
def kernel_grid():
    return quiet_grid(1, 3.5, 7.0, 65, 65)


@pytest.fixture(scope="session")
def kernels(kernel_grid):
    """Heat-kernel snapshots keyed by time on the 65^3 kernel grid."""
    return {k.t: k for k in heat_kernels(KERNEL_TIMES, kernel_grid)}


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(1, 2.0, 4.0, 9, 9)
