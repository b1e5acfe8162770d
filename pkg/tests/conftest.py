import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="full-scale run; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def random_stable(rng, n, margin=0.5):
    """Random real matrix shifted so its spectral abscissa is -margin."""
    a = rng.standard_normal((n, n))
    return a - (np.max(np.linalg.eigvals(a).real) + margin) * np.eye(n)


def random_nsd(rng, n):
    """Random matrix with negative semidefinite symmetric part."""
    a = rng.standard_normal((n, n))
    return a - (np.linalg.eigvalsh(0.5 * (a + a.T))[-1] + 0.1) * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20211)
