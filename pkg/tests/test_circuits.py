import json

import numpy as np
import pytest

from coherence_scope.channels import (KrausChannel, Z, amplitude_damping, depolarizing, random_channel, rotation,
                                      rotation_unitary, unitary)
from coherence_scope.circuits import (
    STANDARD_GATES, CircuitProtocolConfig, CircuitSpec, FinalMeasure, Gate, MeasureReset, NoiseModel, NoisyGate,
    NoisyMeasurement, NoisyPrep, Prep, acceptance, build_ghz_circuit, compile_with_twirl, is_clifford,
    run_circuit_channel_protocol, run_gate_protocol, run_measurement_protocol, simulate_density,
    simulate_distribution, simulate_parity_acceptance,
)
from coherence_scope.exceptions import ValidationError
from coherence_scope.ghz import GhzBasis, GhzExperiment, accept_probability, run_channel_protocol


def test_clifford_check():
    for name in ("H", "S", "CNOT", "X"):
        assert is_clifford(STANDARD_GATES[name])
    assert not is_clifford(rotation_unitary(0.1, (0, 0, 1)))


@pytest.mark.parametrize("label,conv", [("X", "standard"), ("Y", "standard"), ("Y", "alt"), ("Z", "standard")])
def test_noiseless_circuit_accepts(label, conv):
    for layout in ("full", "two_qubit"):
        c = build_ghz_circuit(4, GhzBasis(label, conv), layout)
        assert simulate_parity_acceptance(c) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("label,conv", [("X", "standard"), ("Y", "standard"), ("Y", "alt"), ("Z", "standard")])
def test_circuit_matches_transfer_engine(label, conv):
    rng = np.random.default_rng(4)
    chans = [random_channel(2, rng) for _ in range(5)]
    b = GhzBasis(label, conv)
    expected = accept_probability(chans, b)
    for layout in ("full", "two_qubit"):
        c = build_ghz_circuit(5, b, layout, probe=chans)
        assert simulate_parity_acceptance(c) == pytest.approx(expected, abs=1e-12)


def test_density_and_distribution_agree():
    c = build_ghz_circuit(3, "X", "full", probe=rotation(0.1, (1, 1, 0)))
    dist = simulate_distribution(c)
    even = sum(p for k, p in dist.items() if k.count("1") % 2 == 0)
    assert even == pytest.approx(simulate_parity_acceptance(c), abs=1e-12)
    assert sum(dist.values()) == pytest.approx(1.0)
    unmeasured = CircuitSpec(3, tuple(e for e in c.elements if not isinstance(e, FinalMeasure)))
    assert np.trace(simulate_density(unmeasured)).real == pytest.approx(1.0)
    with pytest.raises(ValidationError, match="measurements"):
        simulate_density(c)


def test_mid_circuit_measure_reset():
    flip = NoisyGate("X", STANDARD_GATES["X"])
    c = CircuitSpec(1, (Prep(0), Gate((0,), flip), MeasureReset(0), FinalMeasure((0,))))
    assert simulate_distribution(c) == {"00": 0.0, "01": 0.0, "10": 1.0, "11": 0.0}


def test_circuit_json_round_trip():
    nm = NoiseModel({"H": rotation(0.01, (1, 0, 0)), "CNOT": unitary(np.kron(rotation_unitary(0.02), np.eye(2)))},
                    NoisyPrep.rotated(rotation_unitary(0.01, (0, 1, 0))), NoisyMeasurement.from_readout(None, (0.99, 0.98)))
    c = build_ghz_circuit(3, "Y", "two_qubit", nm, probe=amplitude_damping(0.02))
    back = CircuitSpec.from_json(c.to_json())
    assert simulate_parity_acceptance(back) == pytest.approx(simulate_parity_acceptance(c), abs=1e-15)
    assert json.loads(c.to_json())["n_qubits"] == 2


def test_readout_construction():
    m = NoisyMeasurement.from_readout(None, (0.99, 0.97))
    assert np.allclose(np.diag(m.m0).real, [0.99, 0.03])


def test_exact_twirl_removes_coherence_of_gate_noise():
    zz = np.kron(Z, Z)
    u = np.cos(0.05) * np.eye(4) + 1j * np.sin(0.05) * zz
    nm = NoiseModel({"CNOT": unitary(u)}, twirl=True)
    c = build_ghz_circuit(4, "X", "full", nm)
    tw = compile_with_twirl(c, "exact")
    for e in tw.elements:
        if isinstance(e, Gate) and e.gate.name == "CNOT":
            assert len(e.gate.noise) == 2


def test_sampled_twirl_converges_to_exact():
    nm = NoiseModel({"H": rotation(0.2, (1, 1, 0)), "CNOT": unitary(np.kron(rotation_unitary(0.2), np.eye(2)))})
    c = build_ghz_circuit(3, "X", "full", nm)
    exact = acceptance(c, "exact")
    sampled = acceptance(c, "sampled", frames=400, seed=1)
    assert sampled == pytest.approx(exact, abs=0.01)
    assert acceptance(c, "off") != pytest.approx(exact, abs=1e-6)


def test_sampled_frames_are_logically_transparent():
    c = build_ghz_circuit(3, "Y", "two_qubit", NoiseModel())
    for frame in compile_with_twirl(c, "sampled", frames=5, seed=3):
        assert simulate_parity_acceptance(frame) == pytest.approx(1.0, abs=1e-12)


def test_twirling_non_clifford_rejected():
    g = NoisyGate("T", np.diag([1, np.exp(1j * np.pi / 4)]))
    c = CircuitSpec(1, (Prep(0), Gate((0,), g, twirl=True), FinalMeasure((0,))))
    with pytest.raises(ValidationError, match="not Clifford"):
        compile_with_twirl(c, "exact")


def test_gate_protocol_reduces_to_channel_protocol():
    noise = rotation(0.02, (0.3, 0.1, 0.9))
    cfg = CircuitProtocolConfig(n_values=(2, 3, 4, 5))
    gate_rows = run_gate_protocol(NoisyGate.standard("H", noise), cfg)
    chan_rows = run_channel_protocol(GhzExperiment(noise, (2, 3, 4, 5)))
    for g, c in zip(gate_rows, chan_rows):
        assert (g.basis, g.n) == (c.basis, c.n)
        assert g.p_error == pytest.approx(c.p_error, abs=1e-12)


def test_circuit_channel_protocol_exact_twirl_of_encoding():
    ch = rotation(0.02, (0, 0, 1))
    cfg = CircuitProtocolConfig(n_values=(2, 3, 4), noise=NoiseModel({"H": depolarizing(0.001)}))
    rows = run_circuit_channel_protocol(ch, cfg)
    assert [r.basis for r in rows] == ["X"] * 3 + ["Y"] * 3 + ["Z"] * 3


def test_measurement_protocol_uses_x_and_y():
    meas = NoisyMeasurement(rotation_unitary(0.02, (1, 0, 0)))
    rows = run_measurement_protocol(meas, CircuitProtocolConfig(n_values=(2, 3, 4, 5)))
    assert {r.basis for r in rows} == {"X", "Y"}


def test_config_validation():
    with pytest.raises(ValidationError):
        CircuitProtocolConfig(n_values=(1, 2))
    with pytest.raises(ValidationError):
        CircuitProtocolConfig(n_values=(2, 3), twirl_mode="sometimes")
    with pytest.raises(ValidationError):
        NoisyGate("bad", np.ones((2, 2)))
    with pytest.raises(ValidationError):
        NoisyPrep(np.eye(2))
    with pytest.raises(ValidationError):
        build_ghz_circuit(3, "Z", "ring")
    with pytest.raises(ValidationError):
        NoisyGate.standard("CNOT", KrausChannel([np.eye(2)]))
