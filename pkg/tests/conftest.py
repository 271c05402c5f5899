import math

import pytest

from flatline.slit_torus import build_slit_torus
from flatline.surface import square_torus

GOLDEN = (1 + math.sqrt(5)) / 2


@pytest.fixture(scope="session")
def torus():
    return square_torus()


@pytest.fixture(scope="session")
def slit_half():
    return build_slit_torus("1/2")


@pytest.fixture(scope="session")
def slit_03():
    return build_slit_torus("3/10")
