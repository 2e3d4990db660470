"""End-to-end fidelity estimation pipelines.

Both pipelines follow the same shape: sample settings offline from the target
(one splittable stream per setting index), allocate shots per setting,
measure the device (or replay recorded outcomes), and average the per-setting
estimators.  Plain DFE divides the measured characteristic value by the
target's; grouped DFE averages single-shot snapshot values over the setting's
shot budget.  For MPO targets the sampled weight is chi^2/Z and the plain
estimator carries the extra factor Z.

Reports are deterministic functions of (target, seed, parameters, records):
wall-clock timings are kept in a separate sidecar file so that re-running or
replaying a run reproduces report and data files byte-for-byte, independent
of the worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .device import DeviceModel, MeasurementRecord, estimate_chi_sigma, measure_many, measurement_basis
from .errors import DegeneracyError, ValidationError
from .grouping import GroupedSetting, group_weights_batch, shot_budget, snapshot_values
from .mpo import (
    canonicalize_induced,
    group_weights_batch_mpo,
    induce_gamma,
    sample_settings_mpo,
    shot_budget_mpo,
    snapshot_values_mpo,
)
from .paulis import group_size as pauli_group_size
from .paulis import pauli_from_str, pauli_to_str, random_sorting, representative
from .sampling import sample_settings
from .streams import PHASE_SORTING, stream
from .tensors import MPO, assert_right_canonical


@dataclass
class PrecisionParams:
    """Additive-error target and the derived number of settings."""

    eps: float
    delta: float
    l: int | None = None

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0 and 0.0 < self.delta < 1.0):
            raise ValidationError("eps and delta must lie in (0, 1)")
        if self.l is None:
            self.l = int(np.ceil(1.0 / (self.eps**2 * self.delta)))
        if self.l < 1:
            raise ValidationError("setting count must be at least 1")


@dataclass
class EstimationReport:
    """Outcome of one estimation run; persisted without wall-clock fields."""

    mode: str
    target_kind: str
    n: int
    estimate: float
    estimators: list[float]
    budgets: list[int]
    total_shots: int
    master_seed: int
    eps: float
    delta: float
    l: int
    lam: float | None = None
    sorting_policy: str | None = None
    sorting: str | None = None
    capped_settings: int = 0
    biased: bool = False
    timings: dict = field(default_factory=dict)

    @property
    def estimator_variance(self) -> float:
        """Sample variance of the per-setting estimators."""
        if len(self.estimators) < 2:
            return 0.0
        return float(np.var(self.estimators, ddof=1))

    def to_dict(self) -> dict:
        doc = {
            "mode": self.mode,
            "targetKind": self.target_kind,
            "n": self.n,
            "estimate": self.estimate,
            "estimatorVariance": self.estimator_variance,
            "estimators": self.estimators,
            "budgets": self.budgets,
            "totalShots": self.total_shots,
            "masterSeed": self.master_seed,
            "eps": self.eps,
            "delta": self.delta,
            "l": self.l,
            "lambda": self.lam,
            "sortingPolicy": self.sorting_policy,
            "sorting": self.sorting,
            "cappedSettings": self.capped_settings,
            "biased": self.biased,
        }
        return doc


def dfe_shot_rule(weight: float, d: int, l: int, eps: float, delta: float) -> int:
    """Shots needed for one plain-DFE setting of sampling weight ``weight``."""
    if weight <= 0.0:
        raise DegeneracyError("shot rule requires a positive sampling weight")
    return int(np.ceil(2.0 / (weight * d * l * eps**2) * np.log(2.0 / delta)))


def _run_measurements(device: DeviceModel, tasks, workers: int) -> list[MeasurementRecord]:
    """Measure every (key, setting, shots) task; order and results are
    independent of the worker count because each task has its own stream."""
    if workers <= 1 or len(tasks) < 2:
        return measure_many(device, tasks)
    chunks = np.array_split(np.arange(len(tasks)), min(workers * 4, len(tasks)))
    records: list[MeasurementRecord] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(measure_many, device, [tasks[i] for i in idx]) for idx in chunks if len(idx)]
        for fut in futures:
            records.extend(fut.result())
    return records


def _write_run_dir(out_dir, config, target, setting_docs, record_docs, report):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.json", config)
    io.save_target(target, out / "target.json")
    io.write_settings(out / "settings.jsonl", setting_docs)
    io.write_records(out / "records.jsonl", record_docs)
    io.write_json(out / "report.json", report.to_dict())
    io.write_json(out / "timings.json", report.timings)


def _prepare_mpo(target: MPO):
    chain = canonicalize_induced(induce_gamma(target))
    return chain


def run_dfe(
    target,
    device: DeviceModel | None,
    params: PrecisionParams,
    master_seed: int,
    *,
    records: list[MeasurementRecord] | None = None,
    settings: list | None = None,
    sigma_exact: np.ndarray | None = None,
    shot_cap: int | None = None,
    workers: int = 1,
    out_dir=None,
) -> EstimationReport:
    """Plain direct fidelity estimation against an MPS or MPO target.

    Exactly one outcome source must be available: a device to measure, a list
    of recorded measurements (replay), or a dense sigma (exact characteristic
    values, no shots; oracle scale).
    """
    is_mpo = isinstance(target, MPO)
    n = target.n
    d = 2**n
    t0 = time.perf_counter()
    if settings is None:
        if is_mpo:
            chain = _prepare_mpo(target)
            settings = sample_settings_mpo(chain, master_seed, params.l)
        else:
            assert_right_canonical(target)
            settings = sample_settings(target, master_seed, params.l)
    t_sample = time.perf_counter() - t0

    capped = 0
    budgets = []
    for s in settings:
        m = dfe_shot_rule(s.weight, d, params.l, params.eps, params.delta)
        if shot_cap is not None and m > shot_cap:
            m = shot_cap
            capped += 1
        budgets.append(m)

    t0 = time.perf_counter()
    if sigma_exact is not None:
        budgets = [0] * len(settings)
        records = []
    elif records is None:
        if device is None:
            raise ValidationError("run_dfe needs a device, records, or a dense sigma")
        tasks = [(k, measurement_basis(s.pauli), budgets[k]) for k, s in enumerate(settings)]
        records = _run_measurements(device, tasks, workers)
    elif len(records) != len(settings):
        raise ValidationError("record count does not match setting count")
    t_measure = time.perf_counter() - t0

    t0 = time.perf_counter()
    if sigma_exact is not None:
        from .oracle import chi_dense

        chi_sigmas = [chi_dense(sigma_exact, s.pauli) for s in settings]
    else:
        chi_sigmas = [estimate_chi_sigma(rec, s.pauli) for rec, s in zip(records, settings)]

    estimators = []
    for s, chi_s in zip(settings, chi_sigmas):
        if s.chi == 0.0:
            raise DegeneracyError("sampled string has zero target weight; corrupted input")
        value = chi_s / s.chi
        if is_mpo:
            value *= s.z
        estimators.append(float(value))
    t_estimate = time.perf_counter() - t0

    report = EstimationReport(
        mode="dfe",
        target_kind="mpo" if is_mpo else "mps",
        n=n,
        estimate=float(np.mean(estimators)),
        estimators=estimators,
        budgets=[int(b) for b in budgets],
        total_shots=int(sum(budgets)),
        master_seed=master_seed,
        eps=params.eps,
        delta=params.delta,
        l=params.l,
        lam=device.lam if device is not None else None,
        capped_settings=capped,
        biased=capped > 0,
        timings={
            "offline_sampling": t_sample,
            "measurement": t_measure,
            "online_estimation": t_estimate,
        },
    )
    if out_dir is not None:
        config = {
            "mode": "dfe",
            "targetKind": report.target_kind,
            "masterSeed": master_seed,
            "eps": params.eps,
            "delta": params.delta,
            "l": params.l,
            "lambda": report.lam,
            "shotCap": shot_cap,
        }
        setting_docs = [io.setting_to_dict(s) for s in settings]
        record_docs = [io.record_to_dict(r) for r in records]
        _write_run_dir(out_dir, config, target, setting_docs, record_docs, report)
    return report


def _sorting_strings(n: int, count: int, master_seed: int, policy: str) -> list[np.ndarray]:
    if policy == "fixed":
        g = random_sorting(n, stream(master_seed, PHASE_SORTING, 0))
        return [g] * count
    if policy == "per-sample":
        return [random_sorting(n, stream(master_seed, PHASE_SORTING, k)) for k in range(count)]
    raise ValidationError(f"unknown sorting policy {policy!r}")


def run_gdfe(
    target,
    device: DeviceModel | None,
    params: PrecisionParams,
    master_seed: int,
    *,
    sorting_policy: str = "fixed",
    records: list[MeasurementRecord] | None = None,
    shot_cap: int | None = None,
    workers: int = 1,
    out_dir=None,
) -> EstimationReport:
    """Grouped direct fidelity estimation against an MPS or MPO target."""
    is_mpo = isinstance(target, MPO)
    n = target.n
    d = 2**n
    t0 = time.perf_counter()
    if is_mpo:
        chain = _prepare_mpo(target)
        settings = sample_settings_mpo(chain, master_seed, params.l)
    else:
        assert_right_canonical(target)
        settings = sample_settings(target, master_seed, params.l)
    sortings = _sorting_strings(n, len(settings), master_seed, sorting_policy)
    t_sample = time.perf_counter() - t0

    t0 = time.perf_counter()
    pauli_matrix_batch = np.stack([s.pauli for s in settings])
    sorting_batch = np.stack(sortings)
    if is_mpo:
        weights = group_weights_batch_mpo(chain, pauli_matrix_batch, sorting_batch)
    else:
        weights = group_weights_batch(target, pauli_matrix_batch, sorting_batch)
    grouped = []
    for s, g, w in zip(settings, sortings, weights):
        if w < s.weight - 1e-12:
            raise DegeneracyError("group weight below the latent string's own weight")
        grp = GroupedSetting(s, g, representative(s.pauli, g), pauli_group_size(s.pauli, g), float(w))
        if is_mpo:
            shot_budget_mpo(grp, params.l, params.eps, params.delta, d, cap=shot_cap)
        else:
            shot_budget(grp, params.l, params.eps, params.delta, d, cap=shot_cap)
        grouped.append(grp)
    t_probs = time.perf_counter() - t0

    t0 = time.perf_counter()
    if records is None:
        if device is None:
            raise ValidationError("run_gdfe needs a device or recorded measurements")
        tasks = [(k, grp.representative, grp.shot_budget) for k, grp in enumerate(grouped)]
        records = _run_measurements(device, tasks, workers)
    elif len(records) != len(grouped):
        raise ValidationError("record count does not match setting count")
    t_measure = time.perf_counter() - t0

    t0 = time.perf_counter()
    estimators = []
    snapshots_per_setting = []
    for grp, rec in zip(grouped, records):
        if is_mpo:
            values = snapshot_values_mpo(target, grp, rec.signs)
        else:
            values = snapshot_values(target, grp, rec.signs)
        snapshots_per_setting.append(values)
        estimators.append(float(values.mean()))
    t_estimate = time.perf_counter() - t0

    capped = sum(1 for grp in grouped if grp.capped)
    report = EstimationReport(
        mode="gdfe",
        target_kind="mpo" if is_mpo else "mps",
        n=n,
        estimate=float(np.mean(estimators)),
        estimators=estimators,
        budgets=[grp.shot_budget for grp in grouped],
        total_shots=int(sum(grp.shot_budget for grp in grouped)),
        master_seed=master_seed,
        eps=params.eps,
        delta=params.delta,
        l=params.l,
        lam=device.lam if device is not None else None,
        sorting_policy=sorting_policy,
        sorting=pauli_to_str(sortings[0]) if sorting_policy == "fixed" else None,
        capped_settings=capped,
        biased=capped > 0,
        timings={
            "offline_sampling": t_sample,
            "offline_group_probs": t_probs,
            "measurement": t_measure,
            "online_estimation": t_estimate,
        },
    )
    if out_dir is not None:
        config = {
            "mode": "gdfe",
            "targetKind": report.target_kind,
            "masterSeed": master_seed,
            "eps": params.eps,
            "delta": params.delta,
            "l": params.l,
            "lambda": report.lam,
            "sortingPolicy": sorting_policy,
            "shotCap": shot_cap,
        }
        setting_docs = [io.setting_to_dict(s, grp) for s, grp in zip(settings, grouped)]
        record_docs = [
            io.record_to_dict(r, snapshot_values=v) for r, v in zip(records, snapshots_per_setting)
        ]
        _write_run_dir(out_dir, config, target, setting_docs, record_docs, report)
    return report


class _ReplayLatent:
    """Minimal latent-setting view reconstructed from a settings file."""

    def __init__(self, pauli, chi, weight, z=None):
        self.pauli = pauli
        self.chi = chi
        self.weight = weight
        if z is not None:
            self.z = z


def replay(run_dir) -> EstimationReport:
    """Recompute a persisted run's report from its settings and records.

    Produces a byte-identical report.json for an untampered run directory.
    """
    run = Path(run_dir)
    config = io.read_json(run / "config.json")
    target = io.load_target(run / "target.json")
    setting_docs = io.read_settings(run / "settings.jsonl")
    records = io.read_records(run / "records.jsonl")
    if len(records) != len(setting_docs):
        raise ValidationError("settings and records disagree in length")
    mode = config["mode"]
    is_mpo = config["targetKind"] == "mpo"
    n = target.n
    d = 2**n

    estimators = []
    budgets = []
    capped = 0
    for doc, rec in zip(setting_docs, records):
        pauli = pauli_from_str(doc["pauli"])
        if mode == "dfe":
            chi_s = estimate_chi_sigma(rec, pauli)
            value = chi_s / doc["chi"]
            if is_mpo:
                value *= doc["Z"]
            budgets.append(rec.shots)
        else:
            grp = GroupedSetting(
                latent=_ReplayLatent(pauli, doc["chi"], doc["weight"], doc.get("Z")),
                sorting=pauli_from_str(doc["sorting"]),
                representative=pauli_from_str(doc["representative"]),
                group_size=doc["groupSize"],
                group_weight=doc["groupWeight"],
                shot_budget=doc["shotBudget"],
                capped=doc.get("capped", False),
            )
            capped += int(grp.capped)
            if is_mpo:
                values = snapshot_values_mpo(target, grp, rec.signs)
            else:
                values = snapshot_values(target, grp, rec.signs)
            value = values.mean()
            budgets.append(grp.shot_budget)
        estimators.append(float(value))

    return EstimationReport(
        mode=mode,
        target_kind=config["targetKind"],
        n=n,
        estimate=float(np.mean(estimators)),
        estimators=estimators,
        budgets=[int(b) for b in budgets],
        total_shots=int(sum(budgets)),
        master_seed=config["masterSeed"],
        eps=config["eps"],
        delta=config["delta"],
        l=config["l"],
        lam=config.get("lambda"),
        sorting_policy=config.get("sortingPolicy"),
        sorting=setting_docs[0].get("sorting") if mode == "gdfe" and config.get("sortingPolicy") == "fixed" else None,
        capped_settings=capped,
        biased=capped > 0,
    )
