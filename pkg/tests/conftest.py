import numpy as np
import pytest

from piezorod import (CanonicalDensity, MaterialParams, PlayBank,
                      UniformTestDensity, threshold_grid)


@pytest.fixture
def material():
    return MaterialParams()


@pytest.fixture
def uniform_density():
    return UniformTestDensity()


@pytest.fixture
def canonical_density():
    return CanonicalDensity(a0=0.1, r_decay=1.0, phi0=64.0, h0=0.5)


@pytest.fixture
def uniform_bank(uniform_density):
    r, w = threshold_grid(uniform_density, n_nodes=20001, rule="midpoint")
    return PlayBank.virgin(r, w)


@pytest.fixture
def canonical_grid(canonical_density):
    return threshold_grid(canonical_density, n_nodes=64)


def random_bank(density, rng, n_moves=12, amp=2.0, r_nodes=48):
    """Bank after a random piecewise-monotone drive, plus the drive's end."""
    from piezorod import bank_advance
    r, w = threshold_grid(density, n_nodes=r_nodes)
    bank = PlayBank.virgin(r, w)
    q = 0.0
    for _ in range(n_moves):
        q = rng.uniform(-amp, amp)
        bank = bank_advance(bank, q)
    return bank, q
