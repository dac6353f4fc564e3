import numpy as np
import pytest

from wvalab.spectrum import DomainKind, GaussianModel, make_gaussian, sld_like_spectrum

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def gauss_p():
    return make_gaussian(GaussianModel(60.0, 1.0), domain_kind=DomainKind.GENERIC)


@pytest.fixture(scope="session")
def gauss_nm():
    return make_gaussian(GaussianModel(1540.0, 25.0), domain_kind=DomainKind.WAVELENGTH)


@pytest.fixture(scope="session")
def sld():
    return sld_like_spectrum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
