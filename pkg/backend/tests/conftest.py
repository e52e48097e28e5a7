import numpy as np
import pytest

from services.code import build_code


@pytest.fixture
def rng():
    return np.random.default_rng(20100111)


@pytest.fixture(scope="session")
def small_code():
    """(2,3)-regular over GF(4), N=9, T=2."""
    return build_code(m=2, n=9, dv=2, dc=3, T=2, seed=3)


@pytest.fixture(scope="session")
def rate_sixth_code():
    """192 information bits over GF(2^8): (2,3) mother, N=72, T=2."""
    return build_code(m=8, n=72, dv=2, dc=3, T=2, seed=7)
