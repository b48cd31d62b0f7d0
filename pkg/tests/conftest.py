import pytest

from rtgrowth.assembly import Grid1D
from rtgrowth.dispersion import Physics, growth_rate
from rtgrowth.profile import ConstantProfile, MollifiedStep


@pytest.fixture(scope="session")
def step():
    return MollifiedStep(1.0, 2.0, 0.5)


@pytest.fixture(scope="session")
def const():
    return ConstantProfile(1.0)


@pytest.fixture(scope="session")
def phys():
    return Physics(mu=0.1, g=1.0)


@pytest.fixture(scope="session")
def grid512(step):
    return Grid1D.for_profile(step, 512)


@pytest.fixture(scope="session")
def grid1024(step):
    return Grid1D.for_profile(step, 1024)


@pytest.fixture(scope="session")
def grid2048(step):
    return Grid1D.for_profile(step, 2048)


@pytest.fixture(scope="session")
def k1_512(step, grid512, phys):
    return growth_rate(step, grid512, 1.0, phys)


@pytest.fixture(scope="session")
def k1_1024(step, grid1024, phys):
    return growth_rate(step, grid1024, 1.0, phys)


@pytest.fixture(scope="session")
def k1_2048(step, grid2048, phys):
    return growth_rate(step, grid2048, 1.0, phys)
