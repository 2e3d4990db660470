"""Command-line interface.

Subcommands cover the full pipeline: target generation, canonicalization,
setting sampling, device measurement, estimation (plain and grouped, MPS and
MPO), the repeated-trial experiment, scaling benchmarks, and dense oracle
checks.  Exit codes: 0 success, 2 validation error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .device import DeviceModel, measure, measurement_basis
from .errors import DegeneracyError, ValidationError
from .estimation import PrecisionParams, replay, run_dfe, run_gdfe
from .experiment import ExperimentConfig, bench_scaling, run_experiment
from .mpo import canonicalize_induced, induce_gamma, sample_settings_mpo
from .paulis import pauli_from_str
from .sampling import sample_settings
from .tensors import MPO, MPS, canonicalize_right, ghz_mps, mpo_symmetrize, random_mpo, random_mps, w_mps


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpsdfe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-mps", help="generate an MPS target file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bond", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=["random", "ghz", "w"], default="random")
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-mpo", help="generate a Hermitian MPO target file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--bond", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("canonicalize", help="bring an MPS into right-canonical form")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["qr", "svd"], default="qr")

    p = sub.add_parser("sample", help="sample measurement settings from a target")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("measure", help="simulate measurements for a settings file")
    p.add_argument("--in", dest="inp", required=True, help="target MPS (device state)")
    p.add_argument("--settings", required=True)
    p.add_argument("--shots", type=int, default=None, help="override per-setting budgets")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="run an estimation pipeline end to end")
    p.add_argument("mode", choices=["dfe", "gdfe"])
    p.add_argument("--in", dest="inp", required=True, help="target MPS or MPO file")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--l", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sorting-policy", choices=["fixed", "per-sample"], default="fixed")
    p.add_argument("--shot-cap", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--device-target", default=None, help="MPS prepared by the device (defaults to the target)")
    p.add_argument("--replay", default=None, help="recompute the report of a persisted run directory")
    p.add_argument("--out", default=None, help="run directory for settings/records/report")

    p = sub.add_parser("experiment-fig5", help="repeated-trial DFE vs GDFE comparison")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--bond", type=int, default=4)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--l", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--target-seed", type=int, default=1234)
    p.add_argument("--sorting-policy", choices=["fixed", "per-sample"], default="fixed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="time the kernels against the stated complexities")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("oracle", help="dense brute-force checks (n <= 6)")
    p.add_argument("action", choices=["weights", "fidelity"])
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="depolarization for fidelity")
    p.add_argument("--top", type=int, default=16, help="number of weight rows to print")

    return parser


def _cmd_gen_mps(args) -> None:
    if args.kind == "random":
        mps = random_mps(args.n, args.bond, args.seed)
    elif args.kind == "ghz":
        mps = ghz_mps(args.n)
    else:
        mps = w_mps(args.n)
    io.save_target(mps, args.out)
    print(f"wrote {args.kind} MPS n={args.n} to {args.out}")


def _cmd_gen_mpo(args) -> None:
    mpo = mpo_symmetrize(random_mpo(args.n, args.bond, args.seed))
    io.save_target(mpo, args.out)
    print(f"wrote Hermitian MPO n={args.n} to {args.out}")


def _cmd_canonicalize(args) -> None:
    target = io.load_target(args.inp)
    if not isinstance(target, MPS):
        raise ValidationError("canonicalize expects an MPS file")
    io.save_target(canonicalize_right(target, method=args.method), args.out)
    print(f"canonicalized {args.inp} -> {args.out}")


def _load_canonical(path) -> MPS | MPO:
    target = io.load_target(path)
    if isinstance(target, MPS) and target.canonical_form != "right_canonical_center_first":
        target = canonicalize_right(target)
    return target


def _cmd_sample(args) -> None:
    target = _load_canonical(args.inp)
    if isinstance(target, MPO):
        chain = canonicalize_induced(induce_gamma(target))
        settings = sample_settings_mpo(chain, args.seed, args.l)
    else:
        settings = sample_settings(target, args.seed, args.l)
    io.write_settings(args.out, [io.setting_to_dict(s) for s in settings])
    print(f"sampled {args.l} settings to {args.out}")


def _cmd_measure(args) -> None:
    target = _load_canonical(args.inp)
    if not isinstance(target, MPS):
        raise ValidationError("the device preparation must be an MPS")
    device = DeviceModel(target, args.lam, args.seed)
    docs = io.read_settings(args.settings)
    out_docs = []
    for doc in docs:
        setting = measurement_basis(pauli_from_str(doc["pauli"]))
        shots = args.shots if args.shots is not None else doc.get("shotBudget", 1)
        record = measure(device, setting, shots, doc["streamKey"])
        out_docs.append(io.record_to_dict(record))
    io.write_records(args.out, out_docs)
    print(f"measured {len(out_docs)} settings to {args.out}")


def _cmd_estimate(args) -> None:
    if args.replay is not None:
        report = replay(args.replay)
        if args.out:
            io.write_json(Path(args.out) / "report.json", report.to_dict())
        print(json.dumps(report.to_dict(), indent=2))
        return
    target = _load_canonical(args.inp)
    params = PrecisionParams(args.eps, args.delta, args.l)
    device_target = _load_canonical(args.device_target) if args.device_target else None
    if device_target is None:
        if isinstance(target, MPO):
            raise ValidationError("MPO estimation needs --device-target (the prepared state)")
        device_target = target
    device = DeviceModel(device_target, args.lam, args.seed)
    if args.mode == "dfe":
        report = run_dfe(
            target, device, params, args.seed,
            shot_cap=args.shot_cap, workers=args.workers, out_dir=args.out,
        )
    else:
        report = run_gdfe(
            target, device, params, args.seed,
            sorting_policy=args.sorting_policy, shot_cap=args.shot_cap,
            workers=args.workers, out_dir=args.out,
        )
    print(json.dumps({k: v for k, v in report.to_dict().items() if k not in ("estimators", "budgets")}, indent=2))


def _cmd_experiment(args) -> None:
    config = ExperimentConfig(
        n=args.n, max_bond=args.bond, lam=args.lam, eps=args.eps, delta=args.delta,
        l=args.l, trials=args.trials, master_seed=args.seed, target_seed=args.target_seed,
        sorting_policy=args.sorting_policy, workers=args.workers,
    )
    result = run_experiment(config, out_dir=args.out)
    print(json.dumps(result.summary(), indent=2))


def _cmd_bench(args) -> None:
    results = bench_scaling(out_dir=args.out, quick=args.quick)
    print(json.dumps(results, indent=2))


def _cmd_oracle(args) -> None:
    from .oracle import dense_from_mpo, dense_from_mps, density, depolarize, exact_fidelity, full_pauli_weights

    target = io.load_target(args.inp)
    dense = dense_from_mps(target) if isinstance(target, MPS) else dense_from_mpo(target)
    if args.action == "weights":
        table = full_pauli_weights(dense)
        rows = sorted(table.items(), key=lambda kv: -kv[1][1])[: args.top]
        for label, (chi, chi_sq) in rows:
            print(f"{label}  chi={chi:+.10f}  weight={chi_sq:.10f}")
    else:
        rho = density(dense)
        sigma = depolarize(rho / np.trace(rho).real, args.lam)
        print(f"fidelity tr(rho sigma) = {exact_fidelity(rho, sigma):.12f}")


_COMMANDS = {
    "gen-mps": _cmd_gen_mps,
    "gen-mpo": _cmd_gen_mpo,
    "canonicalize": _cmd_canonicalize,
    "sample": _cmd_sample,
    "measure": _cmd_measure,
    "estimate": _cmd_estimate,
    "experiment-fig5": _cmd_experiment,
    "bench": _cmd_bench,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
