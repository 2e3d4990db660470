"""Acceptance criteria for the full toolkit.

Each test implements one numbered criterion at its stated tolerance and
prints a PASS/FAIL line (run with ``pytest -s`` to see them live).  The
repeated-trial comparison (criterion 7) runs the full-scale repeated-trial
experiment and takes several minutes; everything else completes in seconds.
"""

import time

import numpy as np
import pytest

from mpsdfe.device import DeviceModel
from mpsdfe.estimation import PrecisionParams, run_gdfe
from mpsdfe.experiment import (
    ExperimentConfig,
    bench_group_prob_vs_bond,
    bench_group_prob_vs_bond_mpo,
    bench_online_vs_n,
    bench_sampling_vs_n,
    run_experiment,
)
from mpsdfe.grouping import make_grouped
from mpsdfe.mpo import canonicalize_induced, induce_gamma, make_grouped_mpo, sample_setting_mpo, z_value
from mpsdfe.oracle import (
    chi_dense,
    dense_from_mpo,
    dense_from_mps,
    density,
    depolarize,
    exact_group_statistics,
    exact_snapshot_expectation,
    full_pauli_weights,
)
from mpsdfe.paulis import all_pauli_strings, enumerate_group, pauli_to_str
from mpsdfe.sampling import chi_of, sample_setting, sample_settings, weight_table
from mpsdfe.tensors import (
    canonicalize_right,
    mpo_symmetrize,
    random_mpo,
    random_mps,
    right_canonical_residuals,
)


def _report(criterion, ok, detail):
    print(f"\nCRITERION {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_sampler_equals_dense_oracle():
    """Product-of-conditionals probability equals dense chi^2 to 1e-10."""
    t0 = time.time()
    cases = [(n, bond) for n in (2, 3, 4, 5) for bond in (1, 2, 3, 4)]
    cases += [(5, 4), (4, 3), (3, 2), (2, 1)]  # 20 targets total
    worst = 0.0
    for seed, (n, bond) in enumerate(cases):
        mps = canonicalize_right(random_mps(n, bond, seed=1000 + seed))
        sampler_table = weight_table(mps)
        dense_table = full_pauli_weights(dense_from_mps(mps))
        for text, (_, want) in dense_table.items():
            got = sampler_table.get(text, (0.0, 0.0))[0]
            worst = max(worst, abs(got - want))
    elapsed = time.time() - t0
    _report(1, worst < 1e-10 and elapsed < 10.0, f"max error {worst:.2e}, {elapsed:.1f}s over {len(cases)} targets")


def test_criterion_2_sampled_distribution_total_variation():
    """10^5 sampled settings land within total variation 0.02 of exact chi^2."""
    t0 = time.time()
    mps = canonicalize_right(random_mps(4, 3, seed=101))
    exact = np.zeros(256)
    for text, (prob, _) in weight_table(mps).items():
        idx = sum({"I": 0, "X": 1, "Y": 2, "Z": 3}[c] * 4**i for i, c in enumerate(text))
        exact[idx] = prob
    draws = sample_settings(mps, master_seed=101, count=100_000)
    codes = np.stack([s.pauli for s in draws]).astype(int) @ (4 ** np.arange(4))
    empirical = np.bincount(codes, minlength=256) / len(draws)
    tv = 0.5 * float(np.abs(empirical - exact).sum())
    elapsed = time.time() - t0
    _report(2, tv <= 0.02 and elapsed < 30.0, f"TV {tv:.4f}, {elapsed:.1f}s")


def test_criterion_3_group_weight_equivalence_and_l2_bound():
    """Group weights equal enumerated sums to 1e-10; l2 bound dominates l1 mass."""
    worst_eq = 0.0
    bound_ok = True
    rng = np.random.default_rng(303)
    for trial in range(20):
        n = int(rng.integers(2, 6))
        bond = int(rng.integers(1, 5))
        mps = canonicalize_right(random_mps(n, bond, seed=2000 + trial))
        dense = dense_from_mps(mps)
        table = full_pauli_weights(dense)
        sorting = rng.integers(1, 4, size=n).astype(np.uint8)
        latent = sample_setting(mps, rng)
        grp = make_grouped(mps, latent, sorting)
        brute = sum(table[pauli_to_str(p)][1] for p in enumerate_group(grp.representative, sorting))
        worst_eq = max(worst_eq, abs(grp.group_weight - brute))
        _, l1_mass, _ = exact_group_statistics(dense, sorting, grp.representative)
        bound_ok &= grp.group_weight * grp.group_size >= l1_mass**2 - 1e-10
    _report(3, worst_eq < 1e-10 and bound_ok, f"max weight error {worst_eq:.2e}, l2 bound {'held' if bound_ok else 'violated'}")


def test_criterion_4_snapshot_unbiasedness_mps_and_mpo():
    """Sign-vector enumeration reproduces the grouped random variable to 1e-8."""
    worst = 0.0
    rng = np.random.default_rng(404)

    mps = canonicalize_right(random_mps(4, 3, seed=404))
    rho = density(dense_from_mps(mps))
    sigmas = [rho, np.eye(16) / 16, depolarize(rho, 0.1)]
    for sigma in sigmas:
        for _ in range(3):
            sorting = rng.integers(1, 4, size=4).astype(np.uint8)
            grp = make_grouped(mps, sample_setting(mps, rng), sorting)
            averaged = exact_snapshot_expectation(rho, sigma, grp)
            members = enumerate_group(grp.representative, sorting)
            want = sum(chi_dense(rho, p) * chi_dense(sigma, p) for p in members) / grp.group_weight
            worst = max(worst, abs(averaged - want))

    mpo = mpo_symmetrize(random_mpo(4, 2, seed=405))
    dense_op = dense_from_mpo(mpo)
    chain = canonicalize_induced(induce_gamma(mpo))
    scale = max(1.0, float(np.max(np.abs(dense_op))))
    for sigma in sigmas:
        for _ in range(3):
            sorting = rng.integers(1, 4, size=4).astype(np.uint8)
            grp = make_grouped_mpo(chain, sample_setting_mpo(chain, rng), sorting)
            averaged = exact_snapshot_expectation(dense_op, sigma, grp)
            members = enumerate_group(grp.representative, sorting)
            want = sum(chi_dense(dense_op, p) * chi_dense(sigma, p) for p in members) / grp.group_weight
            worst = max(worst, abs(averaged - want) / scale)
    _report(4, worst < 1e-8, f"max deviation {worst:.2e} across sigma in {{rho, I/d, mix}}")


def test_criterion_5_mpo_normalization_and_plain_estimator():
    """Z = tr(O^2) to 1e-8; non-grouped estimator expectation = tr(O sigma) to 1e-10."""
    worst_z = 0.0
    worst_est = 0.0
    for seed in (505, 506, 507):
        mpo = mpo_symmetrize(random_mpo(4, 2, seed=seed))
        dense_op = dense_from_mpo(mpo)
        chain = canonicalize_induced(induce_gamma(mpo))
        z = z_value(chain)
        purity = float(np.real(np.trace(dense_op @ dense_op)))
        worst_z = max(worst_z, abs(z - purity) / max(1.0, purity))

        sigma = depolarize(density(dense_from_mps(canonicalize_right(random_mps(4, 2, seed=seed + 50)))), 0.2)
        table = full_pauli_weights(dense_op)
        total = 0.0
        for pauli in all_pauli_strings(4):
            chi = table[pauli_to_str(pauli)][0]
            if abs(chi) < 1e-12:
                continue
            total += (chi**2 / z) * (z * chi_dense(sigma, pauli) / chi)
        truth = float(np.real(np.trace(dense_op @ sigma)))
        worst_est = max(worst_est, abs(total - truth) / max(1.0, abs(truth)))
    _report(
        5,
        worst_z < 1e-8 and worst_est < 1e-10,
        f"Z error {worst_z:.2e}, estimator expectation error {worst_est:.2e}",
    )


def test_criterion_6_canonical_form_and_gauge_invariance():
    """Residuals <= 1e-12 at every site; every chi preserved to 1e-10."""
    worst_residual = 0.0
    worst_chi = 0.0
    for seed, (n, bond) in enumerate([(4, 3), (5, 4), (5, 2)]):
        raw = random_mps(n, bond, seed=600 + seed)
        canon = canonicalize_right(raw)
        worst_residual = max(worst_residual, max(right_canonical_residuals(canon.sites)))
        dense_raw = dense_from_mps(raw)
        dense_raw = dense_raw / np.linalg.norm(dense_raw)
        for pauli in all_pauli_strings(n):
            want = chi_dense(dense_raw, pauli)
            worst_chi = max(worst_chi, abs(abs(chi_of(canon, pauli)) - abs(want)))
    _report(
        6,
        worst_residual <= 1e-12 and worst_chi <= 1e-10,
        f"canonical residual {worst_residual:.2e}, chi drift {worst_chi:.2e}",
    )


@pytest.mark.slow
def test_criterion_7_full_scale_experiment():
    """n=12 depolarized comparison: accuracy, MSE reduction, comparable shots."""
    config = ExperimentConfig(
        n=12, max_bond=4, lam=0.1, eps=0.1, delta=0.1,
        trials=100, master_seed=7, target_seed=1234, workers=2,
    )
    t0 = time.time()
    result = run_experiment(config)
    elapsed = time.time() - t0
    summary = result.summary()
    truth = 0.9 + 0.1 / 4096
    dfe_mean = summary["dfeMeanFinalEstimate"]
    gdfe_mean = summary["gdfeMeanFinalEstimate"]
    ratio = summary["mseRatio"]
    shots_ratio = summary["gdfeMeanTotalShots"] / summary["dfeMeanTotalShots"]
    ok_a = abs(dfe_mean - truth) < 0.01 and abs(gdfe_mean - truth) < 0.01
    ok_b = ratio <= 0.2
    ok_c = 0.5 <= shots_ratio <= 2.0
    _report(
        7,
        ok_a and ok_b and ok_c,
        f"means {dfe_mean:.5f}/{gdfe_mean:.5f} vs {truth:.6f}, "
        f"MSE ratio {ratio:.3f}, shots ratio {shots_ratio:.2f}, {elapsed/60:.1f} min",
    )


@pytest.mark.slow
def test_criterion_8_scaling_benchmarks():
    """Kernel timings track the stated complexity table."""
    sampling = bench_sampling_vs_n()
    online = bench_online_vs_n()
    grouped = bench_group_prob_vs_bond()
    grouped_mpo = bench_group_prob_vs_bond_mpo()
    ok = (
        sampling["r2"] > 0.95
        and online["r2"] > 0.95
        and grouped["max_deviation_factor"] <= 2.0
        and grouped_mpo["max_deviation_factor"] <= 2.0
    )
    _report(
        8,
        ok,
        f"sampling R2 {sampling['r2']:.3f}, online R2 {online['r2']:.3f}, "
        f"B^5 deviation x{grouped['max_deviation_factor']:.2f} (fit {grouped['fitted_exponent']:.2f}), "
        f"B^3 deviation x{grouped_mpo['max_deviation_factor']:.2f} (fit {grouped_mpo['fitted_exponent']:.2f})",
    )


def test_criterion_9_bit_identical_runs_across_workers(tmp_path):
    """Same master seed gives byte-identical artifacts for any worker count."""
    mps = canonicalize_right(random_mps(4, 3, seed=909))
    params = PrecisionParams(0.25, 0.25)
    dirs = []
    for workers, name in ((1, "w1"), (2, "w2")):
        device = DeviceModel(mps, 0.1, 909)
        out = tmp_path / name
        run_gdfe(mps, device, params, 909, workers=workers, out_dir=out)
        dirs.append(out)
    identical = all(
        (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes()
        for f in ("settings.jsonl", "records.jsonl", "report.json")
    )
    _report(9, identical, "settings, records, and report byte-identical for workers=1 vs 2")
