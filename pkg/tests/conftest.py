import numpy as np
import pytest

from levibound.geometry import catalog_domain


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ball2():
    return catalog_domain("ball", 2)


@pytest.fixture(scope="session")
def bidisc():
    return catalog_domain("polydisc", 2)


@pytest.fixture(scope="session")
def disc():
    return catalog_domain("polydisc", 1)


@pytest.fixture(scope="session")
def disc_ball():
    return catalog_domain("product_disc_ball", 3)


@pytest.fixture(scope="session")
def ellipsoid():
    return catalog_domain("ellipsoid", 2, [2, 1])


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
