import numpy as np
import pytest

from wglsm.spectra import CrossSection


@pytest.fixture
def unit():
    return CrossSection(1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
