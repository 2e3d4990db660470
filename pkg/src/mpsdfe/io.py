"""On-disk formats: targets, settings, measurement records, reports.

Targets are single JSON documents; settings and records are JSON-lines files
with one record per line.  Complex tensor entries are stored as [re, im]
pairs in the fixed index order, and floats round-trip bit-exactly through
Python's shortest-repr JSON encoding.

A run directory written by the estimation pipelines contains::

    config.json     parameters, seeds, and target snapshot path
    target.json     the target itself (so replay is self-contained)
    settings.jsonl  one sampled setting per line
    records.jsonl   one measurement record per line
    report.json     the deterministic estimation report
    timings.json    wall-clock per phase (volatile; kept out of report.json)
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .device import MeasurementRecord
from .errors import ValidationError
from .paulis import pauli_from_str, pauli_to_str, signs_from_str, signs_to_str
from .tensors import MPO, MPS


def _complex_to_nested(arr: np.ndarray):
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _nested_to_complex(nested) -> np.ndarray:
    arr = np.asarray(nested, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def mps_to_dict(mps: MPS) -> dict:
    return {
        "kind": "mps",
        "n": mps.n,
        "physDim": 2,
        "bondDims": mps.bond_dims,
        "canonicalForm": mps.canonical_form,
        "provenance": mps.provenance,
        "sites": [_complex_to_nested(t) for t in mps.sites],
    }


def mps_from_dict(doc: dict) -> MPS:
    if doc.get("kind") != "mps":
        raise ValidationError("document is not an MPS")
    return MPS(
        [_nested_to_complex(site) for site in doc["sites"]],
        canonical_form=doc.get("canonicalForm", "none"),
        provenance=doc.get("provenance"),
    )


def mpo_to_dict(mpo: MPO) -> dict:
    return {
        "kind": "mpo",
        "n": mpo.n,
        "physDims": [2, 2],
        "bondDims": mpo.bond_dims,
        "hermitian": mpo.hermitian,
        "provenance": mpo.provenance,
        "sites": [_complex_to_nested(t) for t in mpo.sites],
    }


def mpo_from_dict(doc: dict) -> MPO:
    if doc.get("kind") != "mpo":
        raise ValidationError("document is not an MPO")
    return MPO(
        [_nested_to_complex(site) for site in doc["sites"]],
        hermitian=doc.get("hermitian", False),
        provenance=doc.get("provenance"),
    )


def save_target(target, path) -> None:
    doc = mps_to_dict(target) if isinstance(target, MPS) else mpo_to_dict(target)
    Path(path).write_text(json.dumps(doc))


def load_target(path):
    doc = json.loads(Path(path).read_text())
    kind = doc.get("kind")
    if kind == "mps":
        return mps_from_dict(doc)
    if kind == "mpo":
        return mpo_from_dict(doc)
    raise ValidationError(f"unknown target kind {kind!r} in {path}")


def setting_to_dict(setting, grouped=None) -> dict:
    """Flat JSON view of a sampled setting, extended with grouping fields."""
    doc = {
        "index": setting.stream_key,
        "pauli": pauli_to_str(setting.pauli),
        "chi": setting.chi,
        "weight": setting.weight,
        "streamKey": setting.stream_key,
    }
    if hasattr(setting, "z"):
        doc["Z"] = setting.z
    if grouped is not None:
        doc.update(
            {
                "sorting": pauli_to_str(grouped.sorting),
                "representative": pauli_to_str(grouped.representative),
                "groupSize": grouped.group_size,
                "groupWeight": grouped.group_weight,
                "shotBudget": grouped.shot_budget,
                "capped": grouped.capped,
            }
        )
    return doc


def write_settings(path, docs: list[dict]) -> None:
    with open(path, "w") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")


def read_settings(path) -> list[dict]:
    docs = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                docs.append(json.loads(line))
    return docs


def record_to_dict(record: MeasurementRecord, snapshot_values=None) -> dict:
    doc = {
        "settingIndex": record.setting_index,
        "setting": pauli_to_str(record.setting),
        "shots": record.shots,
        "signs": [signs_to_str(row) for row in record.signs],
    }
    if snapshot_values is not None:
        doc["snapshotValues"] = [float(v) for v in snapshot_values]
    return doc


def record_from_dict(doc: dict) -> MeasurementRecord:
    setting = pauli_from_str(doc["setting"])
    if doc["signs"]:
        signs = np.stack([signs_from_str(s) for s in doc["signs"]])
    else:
        signs = np.zeros((0, len(setting)), dtype=np.int8)
    return MeasurementRecord(doc["settingIndex"], setting, signs)


def write_records(path, docs: list[dict]) -> None:
    with open(path, "w") as fh:
        for doc in docs:
            fh.write(json.dumps(doc) + "\n")


def read_records(path) -> list[MeasurementRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
    return records


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
