"""Repeated-trial experiment and complexity benchmarks.

The experiment pits plain DFE against grouped DFE on a depolarized random-MPS
preparation: each trial runs both pipelines end to end with its own derived
seeds, and the emitted tables carry running mean-squared-error and cumulative
shot-count curves with normal-approximation 95% confidence bands.  The MSE is
computed against the exact depolarized fidelity (1 - lambda) + lambda/d; the
curve against 1.0 is recorded alongside.

Benchmarks time the individual kernels (setting sampling, group-probability
recursion, online estimation) across system sizes and bond dimensions and
report log-log regression diagnostics against the expected power laws.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import io
from .device import DeviceModel, estimate_chi_sigma
from .estimation import PrecisionParams, run_dfe, run_gdfe
from .grouping import group_weight
from .sampling import sample_setting
from .streams import trial_seed
from .tensors import MPS, canonicalize_right, random_mps


@dataclass
class ExperimentConfig:
    """Paper-style comparison run; defaults reproduce the n=12 study."""

    n: int = 12
    max_bond: int = 4
    lam: float = 0.1
    eps: float = 0.1
    delta: float = 0.1
    l: int | None = None
    trials: int = 100
    master_seed: int = 7
    target_seed: int = 1234
    sorting_policy: str = "fixed"
    workers: int = 1


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    truth: float
    dfe_estimates: np.ndarray  # (trials, l) running estimates
    gdfe_estimates: np.ndarray
    dfe_shots: np.ndarray  # (trials, l) cumulative shots
    gdfe_shots: np.ndarray

    def final_mse(self, mode: str) -> float:
        runs = self.dfe_estimates if mode == "dfe" else self.gdfe_estimates
        return float(np.mean((runs[:, -1] - self.truth) ** 2))

    def summary(self) -> dict:
        dfe_mse = self.final_mse("dfe")
        gdfe_mse = self.final_mse("gdfe")
        return {
            "config": asdict(self.config),
            "truth": self.truth,
            "dfeFinalMse": dfe_mse,
            "gdfeFinalMse": gdfe_mse,
            "mseRatio": gdfe_mse / dfe_mse if dfe_mse > 0 else None,
            "dfeMeanFinalEstimate": float(self.dfe_estimates[:, -1].mean()),
            "gdfeMeanFinalEstimate": float(self.gdfe_estimates[:, -1].mean()),
            "dfeMeanTotalShots": float(self.dfe_shots[:, -1].mean()),
            "gdfeMeanTotalShots": float(self.gdfe_shots[:, -1].mean()),
        }


def _one_trial(target: MPS, config: ExperimentConfig, trial: int):
    params = PrecisionParams(config.eps, config.delta, config.l)
    seed_dfe = trial_seed(config.master_seed, 2 * trial)
    seed_gdfe = trial_seed(config.master_seed, 2 * trial + 1)
    device_dfe = DeviceModel(target, config.lam, seed_dfe)
    device_gdfe = DeviceModel(target, config.lam, seed_gdfe)
    rep_dfe = run_dfe(target, device_dfe, params, seed_dfe)
    rep_gdfe = run_gdfe(
        target, device_gdfe, params, seed_gdfe, sorting_policy=config.sorting_policy
    )
    steps = np.arange(1, params.l + 1)
    return (
        np.cumsum(rep_dfe.estimators) / steps,
        np.cumsum(rep_gdfe.estimators) / steps,
        np.cumsum(rep_dfe.budgets).astype(float),
        np.cumsum(rep_gdfe.budgets).astype(float),
    )


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run all trials (optionally in parallel) and emit curve tables."""
    target = canonicalize_right(random_mps(config.n, config.max_bond, config.target_seed))
    truth = (1 - config.lam) + config.lam / 2**config.n
    trials = range(config.trials)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_one_trial, [target] * config.trials, [config] * config.trials, trials))
    else:
        rows = [_one_trial(target, config, t) for t in trials]
    result = ExperimentResult(
        config=config,
        truth=truth,
        dfe_estimates=np.stack([r[0] for r in rows]),
        gdfe_estimates=np.stack([r[1] for r in rows]),
        dfe_shots=np.stack([r[2] for r in rows]),
        gdfe_shots=np.stack([r[3] for r in rows]),
    )
    if out_dir is not None:
        write_experiment_tables(result, out_dir)
    return result


def _mse_with_band(estimates: np.ndarray, reference: float):
    sq = (estimates - reference) ** 2
    mse = sq.mean(axis=0)
    trials = sq.shape[0]
    band = 1.96 * sq.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros_like(mse)
    return mse, band


def write_experiment_tables(result: ExperimentResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "summary.json", result.summary())

    dfe_mse, dfe_band = _mse_with_band(result.dfe_estimates, result.truth)
    gdfe_mse, gdfe_band = _mse_with_band(result.gdfe_estimates, result.truth)
    dfe_mse_one, _ = _mse_with_band(result.dfe_estimates, 1.0)
    gdfe_mse_one, _ = _mse_with_band(result.gdfe_estimates, 1.0)
    trials = result.config.trials
    shot_band = 1.96 / np.sqrt(trials) if trials > 1 else 0.0
    with open(out / "curves.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "settings",
                "dfe_estimate_mean", "gdfe_estimate_mean",
                "dfe_mse", "dfe_mse_ci95", "gdfe_mse", "gdfe_mse_ci95",
                "dfe_shots_mean", "dfe_shots_ci95", "gdfe_shots_mean", "gdfe_shots_ci95",
                "dfe_mse_vs_one", "gdfe_mse_vs_one",
            ]
        )
        ddof = 1 if trials > 1 else 0
        dfe_shots_sd = result.dfe_shots.std(axis=0, ddof=ddof)
        gdfe_shots_sd = result.gdfe_shots.std(axis=0, ddof=ddof)
        for k in range(result.dfe_estimates.shape[1]):
            writer.writerow(
                [
                    k + 1,
                    result.dfe_estimates[:, k].mean(), result.gdfe_estimates[:, k].mean(),
                    dfe_mse[k], dfe_band[k], gdfe_mse[k], gdfe_band[k],
                    result.dfe_shots[:, k].mean(), shot_band * dfe_shots_sd[k],
                    result.gdfe_shots[:, k].mean(), shot_band * gdfe_shots_sd[k],
                    dfe_mse_one[k], gdfe_mse_one[k],
                ]
            )


# ---------------------------------------------------------------------------
# Scaling benchmarks
# ---------------------------------------------------------------------------


def _median_time(fn, repeats: int = 3) -> float:
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def linear_fit_r2(xs, ys) -> tuple[float, float, float]:
    """Least-squares line fit; returns (slope, intercept, R^2)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = np.sum((ys - pred) ** 2)
    ss_tot = np.sum((ys - ys.mean()) ** 2)
    return float(slope), float(intercept), float(1 - ss_res / ss_tot)


def power_law_deviation(xs, ys, exponent: float) -> tuple[float, float]:
    """Fit a fixed-exponent power law; return (fitted slope, max deviation factor).

    The deviation factor is max over points of t / (c * x^exponent) and its
    inverse, with log c the least-squares constant.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    log_c = np.mean(np.log(ys) - exponent * np.log(xs))
    residuals = np.log(ys) - (log_c + exponent * np.log(xs))
    fitted_slope, _, _ = linear_fit_r2(np.log(xs), np.log(ys))
    return fitted_slope, float(np.exp(np.max(np.abs(residuals))))


def _bench_chain(n: int, bond: int, seed: int) -> MPS:
    """Right-canonical chain with every interior bond at ``bond``.

    Unlike the saturation profile of ``random_mps``, this keeps the bond
    dimension flat along the chain (canonicalization shrinks only the last
    few sites), so kernel timings isolate the bond-dimension scaling.
    """
    rng = np.random.default_rng(seed)
    dims = [1] + [bond] * (n - 1) + [1]
    sites = []
    for i in range(n):
        shape = (dims[i], dims[i + 1], 2)
        sites.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return canonicalize_right(MPS(sites))


def bench_sampling_vs_n(ns=(16, 32, 64, 128), bond=8, settings=64, seed=11) -> dict:
    """Per-setting sampling time as a function of chain length."""
    rows = []
    for n in ns:
        target = _bench_chain(n, bond, seed)
        rng = np.random.default_rng(seed)

        def draw():
            for _ in range(settings):
                sample_setting(target, rng)

        rows.append(_median_time(draw) / settings)
    slope, intercept, r2 = linear_fit_r2(ns, rows)
    return {"ns": list(ns), "seconds_per_setting": rows, "slope": slope, "r2": r2}


def bench_online_vs_n(ns=(16, 32, 64, 128), elements=4_000_000, seed=12) -> dict:
    """Per-shot online cost of the plain estimator (sign products).

    The shot count shrinks with n so every measurement touches the same
    number of array elements; this keeps cache behavior comparable across
    sizes and isolates the per-shot scaling.
    """
    from .device import MeasurementRecord

    rows = []
    rng = np.random.default_rng(seed)
    for n in ns:
        shots = elements // n
        pauli = rng.integers(1, 4, size=n).astype(np.uint8)
        signs = np.where(rng.random((shots, n)) < 0.5, 1, -1).astype(np.int8)
        record = MeasurementRecord(0, pauli, signs)
        rows.append(_median_time(lambda: estimate_chi_sigma(record, pauli), repeats=5) / shots)
    slope, intercept, r2 = linear_fit_r2(ns, rows)
    return {"ns": list(ns), "seconds_per_shot": rows, "slope": slope, "r2": r2}


def bench_group_prob_vs_bond(bonds=(12, 16, 20, 24), n=10, settings=3, seed=13) -> dict:
    """Group-weight recursion time vs MPS bond dimension (expected ~B^5)."""
    rows = []
    for bond in bonds:
        target = _bench_chain(n, bond, seed)
        rng = np.random.default_rng(seed)
        sorting = rng.integers(1, 4, size=n).astype(np.uint8)
        latents = [sample_setting(target, rng) for _ in range(settings)]

        def probs():
            for latent in latents:
                group_weight(target, latent, sorting)

        rows.append(_median_time(probs) / settings)
    fitted, deviation = power_law_deviation(bonds, rows, 5.0)
    return {
        "bonds": list(bonds),
        "seconds_per_setting": rows,
        "fitted_exponent": fitted,
        "max_deviation_factor": deviation,
        "stated_exponent": 5.0,
    }


def _bench_mpo_chain(n: int, bond: int, seed: int):
    """Canonical induced chain with flat interior bonds, for timing only."""
    from .mpo import InducedChain, canonicalize_induced

    rng = np.random.default_rng(seed)
    dims = [1] + [bond] * (n - 1) + [1]
    sites = []
    for i in range(n):
        shape = (dims[i], dims[i + 1], 4)
        sites.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return canonicalize_induced(InducedChain(sites))


def bench_group_prob_vs_bond_mpo(bonds=(96, 128, 160, 192), n=8, settings=4, seed=14) -> dict:
    """Group-weight recursion time vs MPO bond dimension (expected ~B^3).

    Times the matrix recursion on a synthetic induced chain; only the message
    conjugations are measured, which is the stated cubic kernel.  The sampled
    characteristic values of a synthetic chain are complex, so the latent
    strings are drawn uniformly rather than through the sampler.
    """
    from .mpo import group_weight_mpo

    rows = []
    for bond in bonds:
        chain = _bench_mpo_chain(n, bond, seed)
        rng = np.random.default_rng(seed)
        sorting = rng.integers(1, 4, size=n).astype(np.uint8)
        latents = [rng.integers(0, 4, size=n).astype(np.uint8) for _ in range(settings)]

        def probs():
            for latent in latents:
                group_weight_mpo(chain, latent, sorting)

        rows.append(_median_time(probs) / settings)
    fitted, deviation = power_law_deviation(bonds, rows, 3.0)
    return {
        "bonds": list(bonds),
        "seconds_per_setting": rows,
        "fitted_exponent": fitted,
        "max_deviation_factor": deviation,
        "stated_exponent": 3.0,
    }


def bench_scaling(out_dir=None, quick=False) -> dict:
    """Run the full benchmark suite; smaller loads with ``quick=True``."""
    if quick:
        results = {
            "sampling_vs_n": bench_sampling_vs_n(ns=(16, 32, 64), settings=24),
            "online_vs_n": bench_online_vs_n(ns=(16, 32, 64), elements=1_000_000),
            "group_prob_vs_bond": bench_group_prob_vs_bond(bonds=(12, 16, 20), settings=2),
            "group_prob_vs_bond_mpo": bench_group_prob_vs_bond_mpo(bonds=(96, 128, 160), settings=3),
        }
    else:
        results = {
            "sampling_vs_n": bench_sampling_vs_n(),
            "online_vs_n": bench_online_vs_n(),
            "group_prob_vs_bond": bench_group_prob_vs_bond(),
            "group_prob_vs_bond_mpo": bench_group_prob_vs_bond_mpo(),
        }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(out / "bench.json", results)
    return results
