import numpy as np
import pytest

from sgsim import Apparatus, GaussianPacket


@pytest.fixture
def default_apparatus() -> Apparatus:
    """Geometry with kick strength kappa = 10: a clean two-humped split."""
    return Apparatus(y_a=0.0, y_b=5.0, y_c=6.0, y_d=26.0, grad_Bz=100.0)


@pytest.fixture
def impulsive_apparatus() -> Apparatus:
    """Short interaction region (0.5% of the flight time), moderate kick."""
    return Apparatus(y_a=0.0, y_b=4.975, y_c=5.025, y_d=10.0, grad_Bz=200.0)


@pytest.fixture
def default_packet() -> GaussianPacket:
    return GaussianPacket()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
