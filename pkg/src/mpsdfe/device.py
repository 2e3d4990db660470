"""Exact measurement simulation of a depolarized MPS preparation.

The simulated device holds sigma = (1 - lambda) |psi><psi| + lambda I/d as an
exact classical mixture: each shot first flips a lambda-biased coin; mixed
shots return uniform signs, pure shots are drawn by perfect sequential
sampling of the MPS in the rotated product basis (right-canonical gauge, so
only a left environment is needed).  No rejection, no approximation.

Each shot consumes a fixed block of n+1 uniforms (branch coin plus one draw
per site) from the stream keyed by the setting index, so shot k is fully
determined by (master seed, stream key, k) regardless of batching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, ValidationError
from .paulis import I, pauli_to_str
from .streams import PHASE_DEVICE, stream
from .tensors import CANONICAL_RIGHT, MPS

_SQRT2 = np.sqrt(2.0)

# Rows are the eigenbras of the local Pauli: row 0 <-> outcome +1.
_ROTATIONS = {
    1: np.array([[1, 1], [1, -1]], dtype=complex) / _SQRT2,  # X
    2: np.array([[1, -1j], [1, 1j]], dtype=complex) / _SQRT2,  # Y
    3: np.eye(2, dtype=complex),  # Z
}


@dataclass
class DeviceModel:
    """Depolarized preparation of a target MPS."""

    target: MPS
    lam: float
    master_seed: int

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError("depolarizing strength must be in [0, 1]")
        if self.target.canonical_form != CANONICAL_RIGHT:
            raise ValidationError("device target must be right-canonical (normalized)")


@dataclass
class MeasurementRecord:
    """Observed sign vectors for one measurement setting."""

    setting_index: int
    setting: np.ndarray  # identity-free Pauli codes
    signs: np.ndarray  # (shots, n) int8 over {+1, -1}

    @property
    def shots(self) -> int:
        return self.signs.shape[0]


def measurement_basis(pauli: np.ndarray) -> np.ndarray:
    """Replace identity sites by Z; used for plain-DFE settings.

    Any basis is valid at identity sites since their signs are ignored
    downstream; Z is the documented fixed choice.
    """
    pauli = np.asarray(pauli, dtype=np.uint8)
    return np.where(pauli == I, np.uint8(3), pauli)


def _rotated_site(site: np.ndarray, label: int) -> np.ndarray:
    """Local tensor with the basis rotation absorbed, flattened to (l, r*2)."""
    left, right, _ = site.shape
    rotated = site.reshape(-1, 2) @ _ROTATIONS[label].T  # (l*r, outcome)
    return rotated.reshape(left, right, 2).reshape(left, right * 2)


def _advance_pure(env: np.ndarray, flat_site: np.ndarray, uniforms: np.ndarray):
    """One perfect-sampling step for a block of shots sharing a local basis.

    Environments are left unnormalized (their squared norm is the running
    prefix probability), so the conditional draw compares u * total against
    the first branch weight without dividing.
    """
    shots = env.shape[0]
    right = flat_site.shape[1] // 2
    branches = (env @ flat_site).reshape(shots, right, 2)
    probs = np.einsum("mrs,mrs->ms", branches, branches.conj()).real
    pick = (uniforms * (probs[:, 0] + probs[:, 1]) >= probs[:, 0]).view(np.int8)
    return branches[np.arange(shots), :, pick], pick


def _sample_pure(sites, setting: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Perfect sequential sampling of |psi> in a rotated product basis."""
    shots, n = uniforms.shape
    outcomes = np.empty((shots, n), dtype=np.int8)
    env = np.ones((shots, 1), dtype=complex)
    for i, site in enumerate(sites):
        env, pick = _advance_pure(env, _rotated_site(site, int(setting[i])), uniforms[:, i])
        outcomes[:, i] = pick
    final = np.einsum("ma,ma->m", env, env.conj()).real
    if not np.all(np.isfinite(final)) or np.any(final <= 0.0):
        raise DegeneracyError("vanishing measurement probability; corrupted state")
    return 1 - 2 * outcomes


def _validate_setting(device: DeviceModel, setting: np.ndarray, shots: int) -> np.ndarray:
    setting = np.asarray(setting, dtype=np.uint8)
    if len(setting) != device.target.n:
        raise ValidationError("setting length does not match the device target")
    if np.any(setting == I):
        raise ValidationError(f"setting {pauli_to_str(setting)} contains identity sites")
    if shots < 0:
        raise ValidationError("shot count must be nonnegative")
    return setting


def measure(device: DeviceModel, setting: np.ndarray, shots: int, stream_key: int) -> MeasurementRecord:
    """Draw sign vectors for a product Pauli setting; exact Born distribution.

    The setting must be identity-free (substitute identities first with
    ``measurement_basis``).
    """
    setting = _validate_setting(device, setting, shots)
    n = device.target.n
    rng = stream(device.master_seed, PHASE_DEVICE, stream_key)
    uniforms = rng.random((shots, n + 1))
    signs = np.empty((shots, n), dtype=np.int8)
    mixed = uniforms[:, 0] < device.lam
    if np.any(mixed):
        signs[mixed] = np.where(uniforms[np.ix_(mixed, range(1, n + 1))] < 0.5, 1, -1).astype(np.int8)
    pure = ~mixed
    if np.any(pure):
        signs[pure] = _sample_pure(device.target.sites, setting, uniforms[np.ix_(pure, range(1, n + 1))])
    return MeasurementRecord(stream_key, setting, signs)


def measure_many(device: DeviceModel, tasks) -> list[MeasurementRecord]:
    """Measure a batch of (stream_key, setting, shots) tasks in task order."""
    return [measure(device, setting, shots, key) for key, setting, shots in tasks]


def estimate_chi_sigma(record: MeasurementRecord, pauli: np.ndarray) -> float:
    """Plug-in estimate of the prepared state's characteristic value.

    Averages the product of observed signs over the string's support and
    scales by 1/sqrt(d).  An all-identity string needs no data: the empty
    product is 1 for every shot.
    """
    pauli = np.asarray(pauli, dtype=np.uint8)
    d = float(2 ** len(pauli))
    support = pauli != I
    if not np.any(support):
        return 1.0 / np.sqrt(d)
    if record.shots == 0:
        raise ValidationError("cannot estimate from an empty record")
    if record.signs.shape[1] != len(pauli):
        raise ValidationError("record length does not match the Pauli string")
    products = np.prod(record.signs[:, support], axis=1)
    return float(products.mean() / np.sqrt(d))
