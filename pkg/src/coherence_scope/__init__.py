"""Coherent-error diagnostics: channel analysis, GHZ parity experiments and accumulation fits."""
from .accumulation import (ContributionReport, NestedFamily, PrepProtocolConfig, contribution_delta,
                           contribution_report, estimate_G, fidelity, ghz_family, location_coherence_test,
                           rotation_sequence_family, run_prep_protocol)
from .channels import (ChoiMatrix, CoherenceParams, KrausChannel, build_channel, canonical_kraus, choi_from_kraus,
                       coherence_params, leading_kraus, pauli_twirl, worst_case_infidelity)
from .circuits import (CircuitProtocolConfig, CircuitSpec, NoiseModel, NoisyGate, NoisyMeasurement, NoisyPrep,
                       compile_with_twirl, run_gate_protocol, run_measurement_protocol, simulate_distribution)
from .estimator import (CoherentErrorEstimator, WeightedQuadraticRegressor, classify_accumulation,
                        extract_channel_params, extract_measurement_params, extract_prep_params, wls_quadratic_fit)
from .exceptions import CoherenceError, CoherenceScopeError, SimulationError, SizeLimitError, ValidationError
from .ghz import (GhzBasis, GhzExperiment, GhzResultRow, accept_probability, ghz_state_fidelity,
                  predicted_error_singlequbit_meas, predicted_infidelity, run_channel_protocol)
from .qudit import (QuditPair, QuditResultRow, predicted_qudit_infidelity, qudit_accept_probability,
                    qudit_state_fidelity, run_qudit_protocol, sensitive_pair_set)

__version__ = "0.1.0"

__all__ = [
    "ChoiMatrix",
    "CircuitProtocolConfig",
    "CircuitSpec",
    "CoherenceError",
    "CoherenceParams",
    "CoherenceScopeError",
    "CoherentErrorEstimator",
    "ContributionReport",
    "GhzBasis",
    "GhzExperiment",
    "GhzResultRow",
    "KrausChannel",
    "NestedFamily",
    "NoiseModel",
    "NoisyGate",
    "NoisyMeasurement",
    "NoisyPrep",
    "PrepProtocolConfig",
    "QuditPair",
    "QuditResultRow",
    "SimulationError",
    "SizeLimitError",
    "ValidationError",
    "WeightedQuadraticRegressor",
    "accept_probability",
    "build_channel",
    "canonical_kraus",
    "choi_from_kraus",
    "classify_accumulation",
    "coherence_params",
    "compile_with_twirl",
    "contribution_delta",
    "contribution_report",
    "estimate_G",
    "extract_channel_params",
    "extract_measurement_params",
    "extract_prep_params",
    "fidelity",
    "ghz_family",
    "ghz_state_fidelity",
    "leading_kraus",
    "location_coherence_test",
    "pauli_twirl",
    "predicted_error_singlequbit_meas",
    "predicted_infidelity",
    "predicted_qudit_infidelity",
    "qudit_accept_probability",
    "qudit_state_fidelity",
    "rotation_sequence_family",
    "run_channel_protocol",
    "run_gate_protocol",
    "run_measurement_protocol",
    "run_prep_protocol",
    "run_qudit_protocol",
    "sensitive_pair_set",
    "simulate_distribution",
    "wls_quadratic_fit",
    "worst_case_infidelity",
]
