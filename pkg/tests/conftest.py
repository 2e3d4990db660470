"""Shared fixtures and dense helpers for the test suite."""

import itertools

import numpy as np
import pytest

from mpsdfe.oracle import dense_from_mps, density, depolarize
from mpsdfe.tensors import canonicalize_right, random_mps

_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)
_Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_2x2 = {"I": _I2, "X": _X2, "Y": _Y2, "Z": _Z2}


def kron_chain(mats) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_matrix_from_str(text: str) -> np.ndarray:
    return kron_chain([PAULI_2x2[c] for c in text])


def all_sign_vectors(n: int):
    return [np.array(s, dtype=np.int8) for s in itertools.product((1, -1), repeat=n)]


@pytest.fixture
def canonical_mps_factory():
    def make(n, bond, seed):
        return canonicalize_right(random_mps(n, bond, seed))

    return make


@pytest.fixture
def depolarized_factory():
    """Dense depolarized preparation of a canonical MPS target."""

    def make(mps, lam):
        return depolarize(density(dense_from_mps(mps)), lam)

    return make
