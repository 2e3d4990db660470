"""Autoregressive Pauli-setting sampling from an MPS target.

A right-canonical target (orthogonality center at the first tensor) lets the
sampler run a single left-to-right sweep: at each site the forward message is
contracted against the local tensor, its conjugate, and each candidate Pauli,
and the squared trace of the resulting Hermitian message is proportional to
the marginal probability of that candidate given the sampled prefix.  The
final scalar message equals tr(rho P), so the same sweep yields the sampled
string, its exact probability, and its characteristic value.

All sweeps below share one candidate-message kernel and are batched over a
leading axis; drawing many settings costs a handful of array operations per
site regardless of the batch size.  Every setting consumes exactly one
uniform per site from its own stream, so batched and one-at-a-time sampling
produce identical draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, ValidationError
from .paulis import PAULI_MATS
from .streams import PHASE_SETTINGS, stream
from .tensors import MPS, assert_right_canonical

# Candidate weights are traces of squared Hermitian matrices; negatives below
# this (relative) threshold are roundoff and clamped, larger ones are treated
# as corrupted input.
NEGATIVE_WEIGHT_RTOL = 1e-12


@dataclass
class SampledSetting:
    """One importance sample from the target's Pauli weight distribution."""

    pauli: np.ndarray  # uint8 codes, length n
    chi: float  # tr(rho P)/sqrt(d)
    weight: float  # chi^2 = sampling probability
    conditionals: np.ndarray = field(repr=False)  # (n, 4) per-site distributions
    stream_key: int | None = None


def _candidate_messages(msgs: np.ndarray, site: np.ndarray) -> np.ndarray:
    """Advance a batch of forward messages by one site for all four candidates.

    msgs has shape (k, l, l); the result has shape (k, 4, r, r) indexed by the
    candidate Pauli code.
    """
    half = np.einsum("kcd,cae->kdae", msgs, site)
    applied = np.einsum("kdae,pfe->kpdaf", half, PAULI_MATS)
    return np.einsum("kpdaf,dbf->kpab", applied, site.conj(), optimize=True)


def _candidate_weights(cands: np.ndarray) -> np.ndarray:
    """tr(M^2) per candidate, clamped against roundoff negatives."""
    beta = np.einsum("kpab,kpba->kp", cands, cands).real
    floor = -NEGATIVE_WEIGHT_RTOL * np.maximum(1.0, np.abs(beta).max(axis=1, keepdims=True))
    if np.any(beta < floor):
        raise DegeneracyError("negative candidate weight beyond roundoff tolerance")
    return np.clip(beta, 0.0, None)


def _draw(beta: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw per row; zero-weight candidates are never selected."""
    totals = beta.sum(axis=1)
    if np.any(totals <= 0.0):
        raise DegeneracyError("all candidate weights vanished at a site")
    cum = np.cumsum(beta, axis=1)
    targets = uniforms * totals
    picks = (cum <= targets[:, None]).sum(axis=1)
    return np.minimum(picks, 3).astype(np.uint8)


def _finalize(msgs: np.ndarray, n: int):
    """Extract chi and weight from the scalar end-of-sweep messages."""
    scalars = msgs[:, 0, 0]
    if np.any(np.abs(scalars.imag) > 1e-8 * np.maximum(1.0, np.abs(scalars.real))):
        raise DegeneracyError("final contraction scalar is not real")
    traces = scalars.real
    d = float(2**n)
    return traces / np.sqrt(d), traces * traces / d


def _sweep_batch(mps: MPS, uniforms: np.ndarray):
    """Shared sampling sweep over a (k, n) matrix of per-site uniforms."""
    k, n = uniforms.shape
    msgs = np.ones((k, 1, 1), dtype=complex)
    labels = np.empty((k, n), dtype=np.uint8)
    conds = np.empty((k, n, 4))
    for i, site in enumerate(mps.sites):
        cands = _candidate_messages(msgs, site)
        beta = _candidate_weights(cands)
        picks = _draw(beta, uniforms[:, i])
        labels[:, i] = picks
        conds[:, i, :] = beta / beta.sum(axis=1, keepdims=True)
        msgs = cands[np.arange(k), picks]
    chi, weight = _finalize(msgs, n)
    return labels, chi, weight, conds


def sample_setting(mps: MPS, rng: np.random.Generator, stream_key: int | None = None) -> SampledSetting:
    """Draw one Pauli string from the target's chi^2 distribution.

    Requires a normalized right-canonical MPS.  Consumes exactly n uniforms
    from ``rng`` (one per site).
    """
    assert_right_canonical(mps)
    uniforms = rng.random(mps.n)[None, :]
    labels, chi, weight, conds = _sweep_batch(mps, uniforms)
    return SampledSetting(labels[0], float(chi[0]), float(weight[0]), conds[0], stream_key)


def sample_settings(mps: MPS, master_seed: int, count: int, start_index: int = 0) -> list[SampledSetting]:
    """Draw ``count`` settings, one per-index stream each, in a single batch.

    Setting k uses stream (settings-phase, start_index + k), so the result is
    identical whether settings are drawn here or one by one in any order.
    """
    assert_right_canonical(mps)
    if count == 0:
        return []
    uniforms = np.stack(
        [stream(master_seed, PHASE_SETTINGS, start_index + k).random(mps.n) for k in range(count)]
    )
    labels, chi, weight, conds = _sweep_batch(mps, uniforms)
    return [
        SampledSetting(labels[k], float(chi[k]), float(weight[k]), conds[k], start_index + k)
        for k in range(count)
    ]


def _forced_sweep(mps: MPS, pauli: np.ndarray):
    """Advance messages along a prescribed string, recording conditionals."""
    if len(pauli) != mps.n:
        raise ValidationError("Pauli string length does not match MPS length")
    msgs = np.ones((1, 1, 1), dtype=complex)
    conds = np.empty((mps.n, 4))
    for i, site in enumerate(mps.sites):
        cands = _candidate_messages(msgs, site)
        beta = _candidate_weights(cands)
        total = beta.sum()
        if total <= 0.0:
            raise DegeneracyError("all candidate weights vanished at a site")
        conds[i] = beta[0] / total
        msgs = cands[:, pauli[i]]
    return msgs, conds


def chi_of(mps: MPS, pauli: np.ndarray) -> float:
    """Deterministic characteristic value tr(rho P)/sqrt(d) of a given string."""
    assert_right_canonical(mps)
    msgs, _ = _forced_sweep(mps, np.asarray(pauli, dtype=np.uint8))
    chi, _ = _finalize(msgs, mps.n)
    return float(chi[0])


def conditionals_for(mps: MPS, pauli: np.ndarray) -> np.ndarray:
    """The (n, 4) conditional distributions along a prescribed string's path."""
    assert_right_canonical(mps)
    _, conds = _forced_sweep(mps, np.asarray(pauli, dtype=np.uint8))
    return conds


def marginal_weight(mps: MPS, prefix: np.ndarray) -> float:
    """Total probability of all strings extending ``prefix``.

    In the right-canonical gauge the unsampled suffix collapses, so the
    marginal is 2^(n-i)/d times the squared trace of the prefix message.
    """
    assert_right_canonical(mps)
    prefix = np.asarray(prefix, dtype=np.uint8)
    if len(prefix) > mps.n:
        raise ValidationError("prefix longer than the chain")
    msgs = np.ones((1, 1, 1), dtype=complex)
    for i in range(len(prefix)):
        cands = _candidate_messages(msgs, mps.sites[i])
        msgs = cands[:, prefix[i]]
    trace_sq = np.einsum("kab,kba->k", msgs, msgs).real[0]
    return float(2 ** (mps.n - len(prefix)) / 2**mps.n * max(trace_sq, 0.0))


def weight_table(mps: MPS, max_n: int = 6) -> dict[str, tuple[float, float]]:
    """Probability and chi of every string, by the sampler's own conditionals.

    Expands the full conditional tree (4^n leaves, shared prefixes), so it is
    guarded to small n; used to certify the sampler against the dense oracle
    and to build exact distributions for statistical tests.
    """
    assert_right_canonical(mps)
    if mps.n > max_n:
        raise ValidationError(f"weight_table is limited to n <= {max_n}")
    table: dict[str, tuple[float, float]] = {}
    d = float(2**mps.n)

    def descend(msgs: np.ndarray, prob: float, prefix: list[int]) -> None:
        i = len(prefix)
        if i == mps.n:
            chi = msgs[0, 0].real / np.sqrt(d)
            table["".join("IXYZ"[c] for c in prefix)] = (prob, float(chi))
            return
        cands = _candidate_messages(msgs[None], mps.sites[i])[0]
        beta = _candidate_weights(cands[None])[0]
        total = beta.sum()
        if total <= 0.0:
            raise DegeneracyError("all candidate weights vanished at a site")
        for p in range(4):
            if beta[p] > 0.0:
                descend(cands[p], prob * beta[p] / total, prefix + [p])

    descend(np.ones((1, 1), dtype=complex), 1.0, [])
    return table
