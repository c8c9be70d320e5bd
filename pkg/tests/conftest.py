import numpy as np
import pytest

import fpplab as F


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so individual test timings stay honest."""
    reg = F.BoxRegion(np.array([0.0, 0.0]), np.array([6.0, 6.0]))
    s = F.sample_poisson(reg, 1.0, 1, 2)
    grid = F.build_index(s, 1.0)
    F.passage_time(grid, [0, 0], [6, 6], 2.0)
    yield
