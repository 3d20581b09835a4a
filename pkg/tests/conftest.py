"""Shared helpers: random physical states and the standard test sources."""
import math

import numpy as np
import pytest

from timebin import SinglePhotonState, WavepacketState

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def random_density(rng, dim):
    """Random full-rank density matrix (Wishart construction)."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_pure_amplitudes(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def bell_state():
    return WavepacketState((INV_SQRT2, 0.0, 0.0, INV_SQRT2))


@pytest.fixture
def even_single():
    return SinglePhotonState((INV_SQRT2, INV_SQRT2))
