"""Dense brute-force references for small systems.

Everything here expands states and operators to full 2^n vectors/matrices and
enumerates Pauli strings or sign vectors outright.  It exists to certify the
tensor-network code paths in tests and for ad-hoc CLI checks; the hard cap at
n <= 6 is an error, not a silent truncation.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .errors import ValidationError
from .paulis import PAULI_MATS, all_pauli_strings, enumerate_group, pauli_to_str, snapshot_factors

N_MAX = 6


def _check_n(n: int) -> None:
    if n > N_MAX:
        raise ValidationError(f"dense oracle is limited to n <= {N_MAX}, got {n}")


def dense_from_mps(mps) -> np.ndarray:
    """Exact state vector, shape (2^n,)."""
    _check_n(mps.n)
    acc = np.ones((1, 1), dtype=complex)  # (basis, bond)
    for site in mps.sites:
        acc = np.einsum("xa,abp->xpb", acc, site).reshape(-1, site.shape[1])
    return acc[:, 0]


def dense_from_mpo(mpo) -> np.ndarray:
    """Exact operator matrix, shape (2^n, 2^n)."""
    _check_n(mpo.n)
    acc = np.ones((1, 1, 1), dtype=complex)  # (row, col, bond)
    for site in mpo.sites:
        acc = np.einsum("xya,abef->xeyfb", acc, site).reshape(
            acc.shape[0] * 2, acc.shape[1] * 2, site.shape[1]
        )
    return acc[:, :, 0]


def pauli_dense(pauli: np.ndarray) -> np.ndarray:
    """Kronecker product matrix of a Pauli code array."""
    _check_n(len(pauli))
    mat = np.ones((1, 1), dtype=complex)
    for code in pauli:
        mat = np.kron(mat, PAULI_MATS[code])
    return mat


def density(dense) -> np.ndarray:
    """Promote a state vector to a density matrix; pass matrices through."""
    dense = np.asarray(dense, dtype=complex)
    if dense.ndim == 1:
        return np.outer(dense, dense.conj())
    return dense


def depolarize(rho: np.ndarray, lam: float) -> np.ndarray:
    d = rho.shape[0]
    return (1 - lam) * rho + lam * np.eye(d) / d


def chi_dense(dense, pauli: np.ndarray) -> float:
    """Characteristic value tr(A P)/sqrt(d) of a dense state or operator."""
    mat = density(dense)
    d = mat.shape[0]
    value = np.sum(mat * pauli_dense(pauli).T) / np.sqrt(d)
    if abs(value.imag) > 1e-9:
        raise ValidationError("characteristic value has a large imaginary part")
    return float(value.real)


def full_pauli_weights(dense) -> dict[str, tuple[float, float]]:
    """chi and chi^2 for every Pauli string, keyed by IXYZ text."""
    mat = density(dense)
    n = int(round(np.log2(mat.shape[0])))
    _check_n(n)
    table = {}
    for pauli in all_pauli_strings(n):
        chi = chi_dense(mat, pauli)
        table[pauli_to_str(pauli)] = (chi, chi * chi)
    return table


def exact_fidelity(rho_dense, sigma_dense) -> float:
    """tr(rho sigma), cross-checked against the overlapping-chi sum."""
    rho = density(rho_dense)
    sigma = density(sigma_dense)
    direct = float(np.real(np.trace(rho @ sigma)))
    n = int(round(np.log2(rho.shape[0])))
    _check_n(n)
    via_chi = sum(
        chi_dense(rho, p) * chi_dense(sigma, p) for p in all_pauli_strings(n)
    )
    if abs(direct - via_chi) > 1e-10:
        raise ValidationError("fidelity decomposition mismatch beyond tolerance")
    return direct


def exact_group_statistics(dense, sorting: np.ndarray, rep: np.ndarray, sigma_dense=None):
    """Group weight, l1-mass, and (optionally) the ideal group estimator.

    The group is enumerated outright.  The weight is the raw sum of squared
    characteristic values of the target (no MPO normalization applied); the
    estimator term is returned only when a dense sigma is supplied.
    """
    members = enumerate_group(rep, sorting)
    chis = np.array([chi_dense(dense, p) for p in members])
    weight = float(np.sum(chis**2))
    l1_mass = float(np.sum(np.abs(chis)))
    estimator = None
    if sigma_dense is not None:
        sigma_chis = np.array([chi_dense(sigma_dense, p) for p in members])
        estimator = float(np.sum(chis * sigma_chis) / weight)
    return weight, l1_mass, estimator


def exact_l1_shot_rule(l1_mass: float, group_weight: float, d: int, l: int, eps: float, delta: float) -> int:
    """Hoeffding shot count using the exact l1-mass of the group."""
    return int(np.ceil(2 * l1_mass**2 / (group_weight**2 * d * l * eps**2) * np.log(2 / delta)))


def exact_snapshot_expectation(target_dense, sigma_dense, grp) -> float:
    """Average the single-shot estimator over the exact outcome distribution.

    Enumerates all 2^n sign vectors of the representative setting, weighting
    each snapshot value by the Born probability tr(sigma Pi_s).  ``grp`` needs
    ``latent.pauli``, ``sorting``, ``representative`` and ``group_weight``
    attributes (the MPO case supplies the normalized weight and an operator
    as the dense target).
    """
    target = density(target_dense)
    sigma = density(sigma_dense)
    n = len(grp.sorting)
    _check_n(n)
    d = 2**n
    total = 0.0
    eye = np.eye(2)
    for signs in product((1, -1), repeat=n):
        signs = np.array(signs, dtype=np.int8)
        projector = np.ones((1, 1), dtype=complex)
        for s, q in zip(signs, grp.representative):
            projector = np.kron(projector, (eye + float(s) * PAULI_MATS[q]) / 2)
        prob = float(np.real(np.trace(sigma @ projector)))
        factors = snapshot_factors(grp.latent.pauli, grp.sorting, signs)
        block = np.ones((1, 1), dtype=complex)
        for f in factors:
            block = np.kron(block, f)
        value = float(np.real(np.sum(target * block.T))) / (grp.group_weight * d)
        total += prob * value
    return total
