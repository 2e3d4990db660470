"""Repeated-trial experiment harness and benchmark fits."""

import csv

import numpy as np

from mpsdfe.experiment import (
    ExperimentConfig,
    _bench_chain,
    linear_fit_r2,
    power_law_deviation,
    run_experiment,
)
from mpsdfe.oracle import dense_from_mps, density, depolarize, exact_fidelity
from mpsdfe.tensors import canonicalize_right, random_mps, right_canonical_residuals


def test_noiseless_mse_decays_for_both_methods():
    config = ExperimentConfig(
        n=3, max_bond=2, lam=0.0, eps=0.3, delta=0.3, trials=6,
        master_seed=11, target_seed=12,
    )
    result = run_experiment(config)
    assert result.truth == 1.0
    dfe_mse = ((result.dfe_estimates - 1.0) ** 2).mean(axis=0)
    gdfe_mse = ((result.gdfe_estimates - 1.0) ** 2).mean(axis=0)
    assert dfe_mse[-1] < dfe_mse[2]
    assert gdfe_mse[-1] < gdfe_mse[2]
    assert dfe_mse[-1] < 0.05 and gdfe_mse[-1] < 0.05


def test_miniature_experiment_agrees_with_oracle_fidelity():
    config = ExperimentConfig(
        n=6, max_bond=3, lam=0.1, eps=0.25, delta=0.2, trials=16,
        master_seed=21, target_seed=22,
    )
    result = run_experiment(config)
    target = canonicalize_right(random_mps(6, 3, 22))
    rho = density(dense_from_mps(target))
    truth = exact_fidelity(rho, depolarize(rho, 0.1))
    assert abs(result.truth - truth) < 1e-12
    for estimates in (result.dfe_estimates, result.gdfe_estimates):
        finals = estimates[:, -1]
        se = finals.std(ddof=1) / np.sqrt(len(finals))
        assert abs(finals.mean() - truth) <= 3 * max(se, 1e-4)


def test_experiment_tables_written(tmp_path):
    config = ExperimentConfig(
        n=3, max_bond=2, lam=0.1, eps=0.35, delta=0.35, trials=3,
        master_seed=31, target_seed=32,
    )
    result = run_experiment(config, out_dir=tmp_path)
    with open(tmp_path / "curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == result.dfe_estimates.shape[1]
    final = rows[-1]
    assert abs(float(final["dfe_mse"]) - result.final_mse("dfe")) < 1e-12
    assert float(final["dfe_shots_mean"]) == result.dfe_shots[:, -1].mean()
    assert (tmp_path / "summary.json").exists()


def test_experiment_deterministic_across_workers():
    kwargs = dict(n=3, max_bond=2, lam=0.1, eps=0.35, delta=0.35, trials=4, master_seed=41, target_seed=42)
    serial = run_experiment(ExperimentConfig(workers=1, **kwargs))
    parallel = run_experiment(ExperimentConfig(workers=2, **kwargs))
    assert np.array_equal(serial.dfe_estimates, parallel.dfe_estimates)
    assert np.array_equal(serial.gdfe_estimates, parallel.gdfe_estimates)
    assert np.array_equal(serial.gdfe_shots, parallel.gdfe_shots)


def test_bench_chain_is_flat_and_canonical():
    chain = _bench_chain(10, 8, seed=3)
    assert max(right_canonical_residuals(chain.sites)) < 1e-12
    interior = chain.bond_dims[1:-4]
    assert all(b == 8 for b in interior)


def test_fit_helpers():
    xs = [1, 2, 3, 4]
    slope, intercept, r2 = linear_fit_r2(xs, [2.0 * x + 1 for x in xs])
    assert abs(slope - 2.0) < 1e-12 and abs(intercept - 1.0) < 1e-12 and r2 > 0.999999
    fitted, deviation = power_law_deviation([2, 4, 8], [12.0 * b**3 for b in [2, 4, 8]], 3.0)
    assert abs(fitted - 3.0) < 1e-9
    assert abs(deviation - 1.0) < 1e-9
