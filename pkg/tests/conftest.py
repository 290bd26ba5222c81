"""Shared fixtures: small named channels and seeded generators."""

import numpy as np
import pytest

from pptdyn.quantum import (
    depolarizing_channel,
    identity_channel,
    maximally_mixed_preparation,
    phi_plus_preparation,
    swap_channel,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def phi2():
    """Preparation of φ⁺₂."""
    return phi_plus_preparation(2)


@pytest.fixture
def mixed2():
    """Preparation of the maximally mixed 2⊗2 state."""
    return maximally_mixed_preparation(2, 2)


@pytest.fixture
def swap2():
    return swap_channel(2)


@pytest.fixture
def identity2():
    return identity_channel(2, 2)


@pytest.fixture
def depolarizing2():
    return depolarizing_channel((2, 2, 2, 2))
