"""Sampling and grouped estimation for Hermitian MPO targets.

Contracting each MPO tensor with the four Pauli matrices on its physical legs
induces a chain over the Pauli alphabet (an MPS of physical dimension 4)
whose boundary products are the target's characteristic values.  Once that
chain is right-canonical, a forward row-vector sweep samples Pauli strings
from chi^2/Z and returns chi and the total squared Pauli mass Z from the same
pass.  Group weights use a matrix recursion that conjugates the running
message by the one or two preimage matrices per site.

Unlike the state case, the chain is never normalized: site 1 carries Z, and
gauge sweeps must preserve it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, ValidationError
from .grouping import GroupedSetting, Snapshot
from .paulis import I, PAULI_MATS, preimage, representative, snapshot_factors
from .paulis import group_size as _group_size
from .streams import PHASE_SETTINGS, stream
from .tensors import MPO, expectation_product_mpo, right_canonicalize_chain


class InducedChain:
    """Operator-space chain of an MPO: one (left, right, 4) tensor per site."""

    def __init__(self, sites, canonical=False):
        self.sites = [np.asarray(t, dtype=complex) for t in sites]
        self.canonical = bool(canonical)
        for i, t in enumerate(self.sites):
            if t.ndim != 3 or t.shape[2] != 4:
                raise ValidationError(f"induced site {i}: expected shape (l, r, 4)")

    @property
    def n(self) -> int:
        return len(self.sites)


@dataclass
class MpoSampledSetting:
    """One importance sample from an MPO target's normalized weight distribution."""

    pauli: np.ndarray
    chi: float  # tr(O P)/sqrt(d), signed
    z: float  # total squared Pauli mass, tr(O^2)
    weight: float  # chi^2 / Z
    conditionals: np.ndarray = field(repr=False)
    stream_key: int | None = None


def induce_gamma(mpo: MPO) -> InducedChain:
    """Build the operator-space chain; requires the Hermitian assertion."""
    if not mpo.hermitian:
        raise ValidationError("MPO target must be flagged Hermitian")
    sites = [
        np.einsum("abef,pfe->abp", t, PAULI_MATS) / np.sqrt(2.0) for t in mpo.sites
    ]
    return InducedChain(sites)


def canonicalize_induced(chain: InducedChain, method: str = "qr") -> InducedChain:
    """Right-canonical gauge with the scale kept at site 1 (Z preserved)."""
    sites, _ = right_canonicalize_chain(chain.sites, normalize=False, method=method)
    return InducedChain(sites, canonical=True)


def _require_canonical(chain: InducedChain) -> None:
    if not chain.canonical:
        raise ValidationError("operation requires a canonicalized induced chain")


def chi_of_mpo(chain: InducedChain, pauli: np.ndarray) -> float:
    """tr(O P)/sqrt(d) as the boundary product of the induced chain."""
    pauli = np.asarray(pauli, dtype=np.uint8)
    if len(pauli) != chain.n:
        raise ValidationError("Pauli string length does not match chain length")
    vec = np.ones((1,), dtype=complex)
    for site, code in zip(chain.sites, pauli):
        vec = vec @ site[:, :, code]
    value = complex(vec[0])
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise DegeneracyError("characteristic value is not real; MPO not Hermitian?")
    return float(value.real)


def z_value(chain: InducedChain) -> float:
    """Total squared Pauli mass, read off the first site in canonical gauge."""
    _require_canonical(chain)
    return float(np.sum(np.abs(chain.sites[0]) ** 2))


def _sweep_batch_mpo(chain: InducedChain, uniforms: np.ndarray):
    k, n = uniforms.shape
    vecs = np.ones((k, 1), dtype=complex)
    labels = np.empty((k, n), dtype=np.uint8)
    conds = np.empty((k, n, 4))
    z = None
    for i, site in enumerate(chain.sites):
        cands = np.einsum("ka,abq->kqb", vecs, site)
        omega = np.einsum("kqb,kqb->kq", cands, cands.conj()).real
        totals = omega.sum(axis=1)
        if np.any(totals <= 0.0):
            raise DegeneracyError("all candidate weights vanished at a site")
        if i == 0:
            z = totals.copy()
        cum = np.cumsum(omega, axis=1)
        picks = np.minimum((cum <= (uniforms[:, i] * totals)[:, None]).sum(axis=1), 3)
        labels[:, i] = picks
        conds[:, i, :] = omega / totals[:, None]
        vecs = cands[np.arange(k), picks]
    scalars = vecs[:, 0]
    if np.any(np.abs(scalars.imag) > 1e-8 * np.maximum(1.0, np.abs(scalars.real))):
        raise DegeneracyError("sampled characteristic value is not real")
    chi = scalars.real
    return labels, chi, z, chi * chi / z, conds


def sample_setting_mpo(chain: InducedChain, rng: np.random.Generator, stream_key: int | None = None) -> MpoSampledSetting:
    """Draw one Pauli string from chi^2/Z; Z comes from the same sweep."""
    _require_canonical(chain)
    uniforms = rng.random(chain.n)[None, :]
    labels, chi, z, weight, conds = _sweep_batch_mpo(chain, uniforms)
    return MpoSampledSetting(labels[0], float(chi[0]), float(z[0]), float(weight[0]), conds[0], stream_key)


def sample_settings_mpo(chain: InducedChain, master_seed: int, count: int, start_index: int = 0) -> list[MpoSampledSetting]:
    """Batch draw with per-index streams; bit-identical to one-by-one sampling."""
    _require_canonical(chain)
    if count == 0:
        return []
    uniforms = np.stack(
        [stream(master_seed, PHASE_SETTINGS, start_index + k).random(chain.n) for k in range(count)]
    )
    labels, chi, z, weight, conds = _sweep_batch_mpo(chain, uniforms)
    return [
        MpoSampledSetting(labels[k], float(chi[k]), float(z[k]), float(weight[k]), conds[k], start_index + k)
        for k in range(count)
    ]


def group_weight_mpo(chain: InducedChain, latent, sorting: np.ndarray) -> float:
    """Normalized group weight sum(chi^2)/Z via the conjugation recursion."""
    _require_canonical(chain)
    pauli = np.asarray(getattr(latent, "pauli", latent), dtype=np.uint8)
    sorting = np.asarray(sorting, dtype=np.uint8)
    if len(pauli) != chain.n or len(sorting) != chain.n:
        raise ValidationError("latent/sorting length does not match chain length")
    rep = representative(pauli, sorting)
    msg = np.ones((1, 1), dtype=complex)
    for i, site in enumerate(chain.sites):
        advanced = np.zeros((site.shape[1], site.shape[1]), dtype=complex)
        for label in preimage(int(sorting[i]), int(rep[i])):
            gamma = site[:, :, label]
            advanced += gamma.conj().T @ msg @ gamma
        msg = advanced
    value = complex(msg[0, 0])
    if abs(value.imag) > 1e-8 * max(1.0, abs(value.real)):
        raise DegeneracyError("group weight is not real")
    z = z_value(chain)
    weight = value.real / z
    if weight < -1e-10:
        raise DegeneracyError(f"negative group weight {weight}")
    return max(weight, 0.0)


def group_weights_batch_mpo(chain: InducedChain, paulis: np.ndarray, sortings: np.ndarray) -> np.ndarray:
    """Batched normalized group weights for (k, n) latents and sorting strings."""
    _require_canonical(chain)
    paulis = np.asarray(paulis, dtype=np.uint8)
    sortings = np.broadcast_to(np.asarray(sortings, dtype=np.uint8), paulis.shape)
    k, n = paulis.shape
    matched = (paulis == I) | (paulis == sortings)
    reps = np.where(matched, sortings, paulis).astype(np.uint8)
    msgs = np.ones((k, 1, 1), dtype=complex)
    for i, site in enumerate(chain.sites):
        gammas = np.moveaxis(site, 2, 0)  # (4, l, r)
        sel = gammas[reps[:, i]]
        advanced = np.einsum("kml,kmo,kor->klr", sel.conj(), msgs, sel, optimize=True)
        ident = gammas[I]
        id_branch = np.einsum("ml,kmo,or->klr", ident.conj(), msgs, ident, optimize=True)
        mask = (reps[:, i] == sortings[:, i])[:, None, None]
        msgs = advanced + np.where(mask, id_branch, 0.0)
    values = msgs[:, 0, 0]
    if np.any(np.abs(values.imag) > 1e-8 * np.maximum(1.0, np.abs(values.real))):
        raise DegeneracyError("group weight is not real")
    weights = values.real / z_value(chain)
    if np.any(weights < -1e-10):
        raise DegeneracyError("negative group weight in batch")
    return np.clip(weights, 0.0, None)


def make_grouped_mpo(chain: InducedChain, latent: MpoSampledSetting, sorting: np.ndarray) -> GroupedSetting:
    sorting = np.asarray(sorting, dtype=np.uint8)
    rep = representative(latent.pauli, sorting)
    weight = group_weight_mpo(chain, latent, sorting)
    if weight < latent.weight - 1e-12:
        raise DegeneracyError("group weight below the latent string's own weight")
    return GroupedSetting(latent, sorting, rep, _group_size(latent.pauli, sorting), weight)


def shot_budget_mpo(grp: GroupedSetting, l: int, eps: float, delta: float, d: int, cap: int | None = None) -> int:
    """Grouped MPO shot rule: the MPS rule with an extra factor of Z."""
    budget = int(
        np.ceil(2 * grp.group_size * grp.latent.z / (grp.group_weight * d * l * eps**2) * np.log(2 / delta))
    )
    if cap is not None and budget > cap:
        grp.capped = True
        budget = cap
    grp.shot_budget = budget
    return budget


def snapshot_mpo(mpo: MPO, grp: GroupedSetting, signs: np.ndarray) -> Snapshot:
    """Single-shot estimator tr(O prod M_i)/(p_g d) for one sign vector."""
    if grp.group_weight <= 0.0:
        raise DegeneracyError("snapshot requires a positive group weight")
    factors = snapshot_factors(grp.latent.pauli, grp.sorting, signs)
    raw = expectation_product_mpo(mpo, factors)
    value = raw.real / (grp.group_weight * 2**mpo.n)
    return Snapshot(grp, np.asarray(signs, dtype=np.int8), float(value))


def snapshot_values_mpo(mpo: MPO, grp: GroupedSetting, signs: np.ndarray) -> np.ndarray:
    """Batched snapshot values; deduplicates over matched-site sign patterns."""
    if grp.group_weight <= 0.0:
        raise DegeneracyError("snapshot requires a positive group weight")
    signs = np.asarray(signs, dtype=np.int8)
    if signs.ndim != 2 or signs.shape[1] != mpo.n:
        raise ValidationError("sign matrix shape does not match the chain")
    if signs.shape[0] == 0:
        return np.zeros(0)
    matched = grp.representative == grp.sorting
    parity = np.prod(signs[:, ~matched], axis=1).astype(float) if np.any(~matched) else np.ones(len(signs))
    if np.any(matched):
        bits = (signs[:, matched] < 0) @ (1 << np.arange(int(matched.sum())))
    else:
        bits = np.zeros(len(signs), dtype=int)
    patterns, inverse = np.unique(bits, return_inverse=True)

    vecs = np.ones((len(patterns), 1), dtype=complex)
    match_pos = 0
    for i, site in enumerate(mpo.sites):
        if matched[i]:
            g = int(grp.sorting[i])
            t_plus = np.einsum("abef,fe->ab", site, np.eye(2) + PAULI_MATS[g])
            t_minus = np.einsum("abef,fe->ab", site, np.eye(2) - PAULI_MATS[g])
            negative = (patterns >> match_pos) & 1
            vecs = np.where(negative[:, None] == 1, vecs @ t_minus, vecs @ t_plus)
            match_pos += 1
        else:
            transfer = np.einsum("abef,fe->ab", site, PAULI_MATS[int(grp.latent.pauli[i])])
            vecs = vecs @ transfer
    base = vecs[:, 0].real / (grp.group_weight * 2**mpo.n)
    return parity * base[inverse]
