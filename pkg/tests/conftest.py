import numpy as np
import pytest

from pxspk import MediumSpec, RegimeKind, ScalingRegime, SourceSpec


@pytest.fixture
def unit_spec():
    """Gaussian family with unit parameters, d=1."""
    return MediumSpec(sigma_c=1.0, ell_z=1.0, ell_x=1.0, d=1)


@pytest.fixture
def kinetic_regime():
    return ScalingRegime(theta=0.05, epsilon=0.05, eta=1.0, beta=1.0,
                         gamma=1.0, kind=RegimeKind.KINETIC)


@pytest.fixture
def gaussian_source():
    return SourceSpec(width=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
