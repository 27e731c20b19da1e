"""Shared helpers for the test suite.

Random objects are drawn from seeded generators so failures reproduce; the
helpers here build the standard ingredients (Hermitian matrices, density
matrices, Davies generators) used across the oracle tests.
"""
import numpy as np
import pytest

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SP = np.array([[0, 0], [1, 0]], dtype=complex)  # raises |0> -> |1> in energy order
SM = np.array([[0, 1], [0, 0]], dtype=complex)


def random_hermitian(rng, d, scale=1.0):
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (M + M.conj().T) / 2


def random_density(rng, d, rank=None):
    """Random full-rank (or fixed-rank) density matrix."""
    r = d if rank is None else rank
    G = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_unit_vector(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(7042)
