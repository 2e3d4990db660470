"""MPO targets: induced chain, sampling, grouping, snapshots."""

import numpy as np
import pytest

from mpsdfe.errors import ValidationError
from mpsdfe.mpo import (
    canonicalize_induced,
    chi_of_mpo,
    group_weight_mpo,
    group_weights_batch_mpo,
    induce_gamma,
    make_grouped_mpo,
    sample_setting_mpo,
    sample_settings_mpo,
    shot_budget_mpo,
    snapshot_mpo,
    snapshot_values_mpo,
    z_value,
)
from mpsdfe.oracle import (
    chi_dense,
    dense_from_mpo,
    dense_from_mps,
    density,
    depolarize,
    exact_snapshot_expectation,
    full_pauli_weights,
)
from mpsdfe.paulis import all_pauli_strings, enumerate_group, pauli_from_str, pauli_to_str
from mpsdfe.tensors import (
    canonicalize_right,
    identity_mpo,
    mpo_symmetrize,
    product_mpo,
    random_mpo,
    random_mps,
)
from tests.conftest import PAULI_2x2, all_sign_vectors


def hermitian_mpo(n, bond, seed):
    return mpo_symmetrize(random_mpo(n, bond, seed))


def test_induce_gamma_requires_hermitian_flag():
    mpo = random_mpo(3, 2, seed=1)
    with pytest.raises(ValidationError):
        induce_gamma(mpo)


def test_induced_identity_mpo():
    chain = induce_gamma(identity_mpo(3))
    for site in chain.sites:
        assert abs(site[0, 0, 0] - np.sqrt(2)) < 1e-12
        assert np.max(np.abs(site[0, 0, 1:])) < 1e-12
    canon = canonicalize_induced(chain)
    assert abs(chi_of_mpo(canon, pauli_from_str("III")) - np.sqrt(8)) < 1e-10


def test_single_site_z_mpo():
    chain = canonicalize_induced(induce_gamma(product_mpo([PAULI_2x2["Z"]], hermitian=True)))
    assert abs(chi_of_mpo(chain, pauli_from_str("Z")) - np.sqrt(2)) < 1e-12
    assert abs(chi_of_mpo(chain, pauli_from_str("X"))) < 1e-12
    setting = sample_setting_mpo(chain, np.random.default_rng(0))
    assert pauli_to_str(setting.pauli) == "Z"
    assert abs(setting.z - 2.0) < 1e-12


def test_chi_matches_dense_for_all_strings():
    mpo = hermitian_mpo(4, 3, seed=11)
    chain = canonicalize_induced(induce_gamma(mpo))
    table = full_pauli_weights(dense_from_mpo(mpo))
    for pauli in all_pauli_strings(4):
        assert abs(chi_of_mpo(chain, pauli) - table[pauli_to_str(pauli)][0]) < 1e-10


def test_gauge_invariance_of_chi():
    mpo = hermitian_mpo(4, 2, seed=13)
    raw = induce_gamma(mpo)
    canon = canonicalize_induced(raw)
    rng = np.random.default_rng(3)
    for _ in range(25):
        pauli = rng.integers(0, 4, size=4).astype(np.uint8)
        vec = np.ones((1,), dtype=complex)
        for site, code in zip(raw.sites, pauli):
            vec = vec @ site[:, :, code]
        assert abs(vec[0].real - chi_of_mpo(canon, pauli)) < 1e-10


def test_z_equals_purity_trace():
    for seed in (17, 18, 19):
        mpo = hermitian_mpo(4, 3, seed=seed)
        chain = canonicalize_induced(induce_gamma(mpo))
        dense = dense_from_mpo(mpo)
        assert abs(z_value(chain) - np.real(np.trace(dense @ dense))) < 1e-8 * max(1.0, z_value(chain))


def test_identity_mpo_sampling_is_deterministic():
    chain = canonicalize_induced(induce_gamma(identity_mpo(3)))
    rng = np.random.default_rng(5)
    for _ in range(10):
        s = sample_setting_mpo(chain, rng)
        assert pauli_to_str(s.pauli) == "III"
        assert abs(s.weight - 1.0) < 1e-10
        assert abs(s.z - 8.0) < 1e-10


def test_sampling_distribution_and_weight_consistency():
    mpo = hermitian_mpo(4, 2, seed=23)
    chain = canonicalize_induced(induce_gamma(mpo))
    table = full_pauli_weights(dense_from_mpo(mpo))
    z = z_value(chain)
    rng = np.random.default_rng(7)
    for _ in range(25):
        s = sample_setting_mpo(chain, rng)
        chi, chi_sq = table[pauli_to_str(s.pauli)]
        assert abs(s.weight - chi_sq / z) < 1e-10
        assert abs(s.chi - chi) < 1e-8
        prod = float(np.prod(s.conditionals[np.arange(4), s.pauli]))
        assert abs(prod - s.weight) < 1e-10


def test_sampled_distribution_total_variation_mpo():
    mpo = hermitian_mpo(3, 2, seed=29)
    chain = canonicalize_induced(induce_gamma(mpo))
    table = full_pauli_weights(dense_from_mpo(mpo))
    z = z_value(chain)
    draws = sample_settings_mpo(chain, master_seed=31, count=50000)
    counts = {}
    for s in draws:
        text = pauli_to_str(s.pauli)
        counts[text] = counts.get(text, 0) + 1
    tv = 0.5 * sum(abs(counts.get(t, 0) / len(draws) - w / z) for t, (_, w) in table.items())
    assert tv < 0.02


def test_group_weight_mpo_trivial_cases():
    chain = canonicalize_induced(induce_gamma(identity_mpo(3)))
    latent = sample_setting_mpo(chain, np.random.default_rng(1))
    for g_text in ("XYZ", "ZZZ", "XXX"):
        assert abs(group_weight_mpo(chain, latent, pauli_from_str(g_text)) - 1.0) < 1e-10

    z_chain = canonicalize_induced(induce_gamma(product_mpo([PAULI_2x2["Z"]], hermitian=True)))
    z_latent = sample_setting_mpo(z_chain, np.random.default_rng(2))
    assert abs(group_weight_mpo(z_chain, z_latent, pauli_from_str("Z")) - 1.0) < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_group_weight_mpo_matches_enumeration(seed):
    mpo = hermitian_mpo(4, 2, seed=seed + 40)
    chain = canonicalize_induced(induce_gamma(mpo))
    table = full_pauli_weights(dense_from_mpo(mpo))
    z = z_value(chain)
    rng = np.random.default_rng(seed)
    sorting = rng.integers(1, 4, size=4).astype(np.uint8)
    latent = sample_setting_mpo(chain, rng)
    grp = make_grouped_mpo(chain, latent, sorting)
    brute = sum(table[pauli_to_str(p)][1] for p in enumerate_group(grp.representative, sorting)) / z
    assert abs(grp.group_weight - brute) < 1e-10
    batch = group_weights_batch_mpo(chain, latent.pauli[None, :], sorting[None, :])[0]
    assert abs(batch - grp.group_weight) < 1e-12


def test_shot_budget_mpo_arithmetic():
    # identity target, n=3: ceil(2*8*8/(1*8*1000*0.01) * ln 20) = ceil(4.79) = 5
    chain = canonicalize_induced(induce_gamma(identity_mpo(3)))
    latent = sample_setting_mpo(chain, np.random.default_rng(0))
    grp = make_grouped_mpo(chain, latent, pauli_from_str("XYZ"))
    assert grp.group_size == 8
    assert shot_budget_mpo(grp, l=1000, eps=0.1, delta=0.1, d=8) == 5


def test_shot_budget_mpo_reduces_to_mps_rule():
    # a singleton group with weight Z/d behaves like the pure-state rule
    from mpsdfe.grouping import GroupedSetting, l2_shot_rule
    from mpsdfe.mpo import MpoSampledSetting

    z = 4.0
    d, l, eps, delta = 16, 200, 0.15, 0.1
    latent = MpoSampledSetting(pauli_from_str("XXXX"), 0.5, z, z / d / z, np.zeros((4, 4)))
    grp = GroupedSetting(latent, pauli_from_str("ZZZZ"), pauli_from_str("XXXX"), 1, z / d)
    got = shot_budget_mpo(grp, l=l, eps=eps, delta=delta, d=d)
    want = l2_shot_rule(1, 1 / d, d=d, l=l, eps=eps, delta=delta)
    assert got == want


def test_snapshot_mpo_identity_target():
    chain = canonicalize_induced(induce_gamma(identity_mpo(3)))
    latent = sample_setting_mpo(chain, np.random.default_rng(3))
    grp = make_grouped_mpo(chain, latent, pauli_from_str("ZXY"))
    for signs in all_sign_vectors(3):
        assert abs(snapshot_mpo(identity_mpo(3), grp, signs).value - 1.0) < 1e-10


def test_snapshot_mpo_matches_mps_snapshot_for_projector():
    # |0..0><0..0| expressed as an MPO reproduces the state snapshot values
    from mpsdfe.grouping import make_grouped, snapshot
    from mpsdfe.sampling import sample_setting
    from mpsdfe.tensors import product_state_mps

    n = 3
    mps = canonicalize_right(product_state_mps(n))
    proj = product_mpo([np.diag([1.0, 0.0])] * n, hermitian=True)
    chain = canonicalize_induced(induce_gamma(proj))
    rng = np.random.default_rng(9)
    sorting = rng.integers(1, 4, size=n).astype(np.uint8)
    latent_state = sample_setting(mps, np.random.default_rng(11))
    grp_state = make_grouped(mps, latent_state, sorting)
    grp_op = make_grouped_mpo(chain, sample_setting_mpo(chain, np.random.default_rng(11)), sorting)
    # same latent string is guaranteed here because both targets share the
    # distribution of |0..0>
    assert pauli_to_str(grp_state.latent.pauli) == pauli_to_str(grp_op.latent.pauli)
    for signs in all_sign_vectors(n):
        a = snapshot(mps, grp_state, signs).value
        b = snapshot_mpo(proj, grp_op, signs).value
        assert abs(a - b) < 1e-10


@pytest.mark.parametrize("sigma_kind", ["pure", "mixed", "depolarized"])
def test_snapshot_mpo_unbiased_by_enumeration(sigma_kind):
    mpo = hermitian_mpo(4, 2, seed=47)
    dense_op = dense_from_mpo(mpo)
    chain = canonicalize_induced(induce_gamma(mpo))
    psi = dense_from_mps(canonicalize_right(random_mps(4, 2, seed=48)))
    rho = density(psi)
    d = rho.shape[0]
    sigma = {"pure": rho, "mixed": np.eye(d) / d, "depolarized": depolarize(rho, 0.1)}[sigma_kind]
    rng = np.random.default_rng(49)
    for _ in range(3):
        sorting = rng.integers(1, 4, size=4).astype(np.uint8)
        latent = sample_setting_mpo(chain, rng)
        grp = make_grouped_mpo(chain, latent, sorting)
        averaged = exact_snapshot_expectation(dense_op, sigma, grp)
        members = enumerate_group(grp.representative, sorting)
        target_rv = sum(chi_dense(dense_op, p) * chi_dense(sigma, p) for p in members) / grp.group_weight
        assert abs(averaged - target_rv) < 1e-8 * max(1.0, abs(target_rv))


def test_snapshot_values_mpo_matches_single():
    mpo = hermitian_mpo(3, 2, seed=53)
    chain = canonicalize_induced(induce_gamma(mpo))
    rng = np.random.default_rng(54)
    latent = sample_setting_mpo(chain, rng)
    grp = make_grouped_mpo(chain, latent, rng.integers(1, 4, size=3).astype(np.uint8))
    signs = np.stack(all_sign_vectors(3))
    values = snapshot_values_mpo(mpo, grp, signs)
    for row, value in zip(signs, values):
        assert abs(snapshot_mpo(mpo, grp, row).value - value) < 1e-10


def test_nongrouped_estimator_expectation_is_trace():
    # sum over support of (chi^2/Z) * (Z chi_sigma / chi) = tr(O sigma)
    mpo = hermitian_mpo(4, 2, seed=59)
    dense_op = dense_from_mpo(mpo)
    chain = canonicalize_induced(induce_gamma(mpo))
    z = z_value(chain)
    sigma = depolarize(density(dense_from_mps(canonicalize_right(random_mps(4, 2, seed=60)))), 0.2)
    total = 0.0
    for pauli in all_pauli_strings(4):
        chi = chi_of_mpo(chain, pauli)
        if abs(chi) < 1e-12:
            continue
        total += (chi**2 / z) * (z * chi_dense(sigma, pauli) / chi)
    want = np.real(np.trace(dense_op @ sigma))
    assert abs(total - want) < 1e-10 * max(1.0, abs(want))
