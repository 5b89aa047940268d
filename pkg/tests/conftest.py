import numpy as np
import pytest

import robinopt as ro


@pytest.fixture(scope="session")
def square8():
    return ro.generate_square(8)


@pytest.fixture(scope="session")
def square16():
    return ro.generate_square(16)


@pytest.fixture(scope="session")
def disk_coarse():
    return ro.generate_disk(32, 8)


@pytest.fixture(scope="session")
def disk_medium():
    return ro.generate_disk(96, 20)


@pytest.fixture(scope="session")
def disk_fine():
    return ro.generate_disk(128, 24)


def weighted_norm(mesh, vals):
    return float(np.sqrt(mesh.edge_lengths @ np.asarray(vals) ** 2))
