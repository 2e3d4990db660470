"""Verification toolkit for MPS/MPO targets with local Pauli measurements.

Sample measurement settings autoregressively from a tensor-network target's
own importance distribution, simulate (or ingest) local Pauli outcomes, and
form direct fidelity estimates, plain or grouped over qubit-wise commuting
settings.
"""

from .device import DeviceModel, MeasurementRecord, estimate_chi_sigma, measure, measurement_basis
from .errors import DegeneracyError, ValidationError
from .estimation import EstimationReport, PrecisionParams, dfe_shot_rule, replay, run_dfe, run_gdfe
from .experiment import ExperimentConfig, bench_scaling, run_experiment
from .grouping import (
    GroupedSetting,
    Snapshot,
    group_weight,
    ideal_group_estimator,
    make_grouped,
    shot_budget,
    snapshot,
    snapshot_values,
)
from .mpo import (
    InducedChain,
    MpoSampledSetting,
    canonicalize_induced,
    chi_of_mpo,
    group_weight_mpo,
    induce_gamma,
    make_grouped_mpo,
    sample_setting_mpo,
    shot_budget_mpo,
    snapshot_mpo,
    z_value,
)
from .paulis import (
    enumerate_group,
    group_size,
    pauli_from_str,
    pauli_to_str,
    preimage,
    qwc,
    random_sorting,
    representative,
    snapshot_factors,
)
from .sampling import SampledSetting, chi_of, marginal_weight, sample_setting, sample_settings
from .tensors import (
    MPO,
    MPS,
    canonicalize_right,
    expectation_product,
    expectation_product_mpo,
    ghz_mps,
    mpo_symmetrize,
    random_mpo,
    random_mps,
    w_mps,
)

__all__ = [name for name in dir() if not name.startswith("_")]
