import numpy as np
import pytest

from coherence_scope.accumulation import (
    NestedFamily, PrepProtocolConfig, bhattacharyya_fidelity, contribution_delta, contribution_report,
    default_r_values, estimate_G, fidelity, fit_loglog_order, ghz_family, location_coherence_test, prep_circuit,
    rotation_angle, rotation_sequence_family, run_prep_protocol,
)
from coherence_scope.channels import Z, X, dephasing, depolarizing, identity, pauli_twirl, rotation, rotation_unitary, unitary
from coherence_scope.circuits import (CircuitSpec, FinalMeasure, Gate, NoisyGate, NoisyPrep, Prep,
                                      compile_with_twirl, simulate_distribution)
from coherence_scope.estimator import wls_quadratic_fit
from coherence_scope.exceptions import SizeLimitError, ValidationError
from coherence_scope.ghz import ghz_state_fidelity


def test_rotation_family_closed_form():
    fam = rotation_sequence_family()
    r = 1e-3
    th = rotation_angle(r)
    for n in (0, 3, 10):
        assert fidelity(fam, n, r) == pytest.approx(np.cos((n + 1) * th) ** 2, abs=1e-14)
        assert fidelity(fam, n, r, omit=0) == pytest.approx(np.cos(n * th) ** 2, abs=1e-14)


def test_ghz_family_matches_ghz_engine():
    ch = lambda r: rotation(rotation_angle(r), (0, 0, 1))
    fam = ghz_family(ch)
    for n in (2, 4, 6):
        rv = default_r_values(n, 0.02)
        G = estimate_G(fam, n, rv)
        raw = (1 - ghz_state_fidelity([ch(rv[1])] * (n + 1) + [identity()], "Z")) / rv[1]
        assert G.value == pytest.approx(raw, rel=0.01)
        assert fidelity(fam, n, rv[1]) == pytest.approx(1 - raw * rv[1], abs=1e-13)


def test_r_checks():
    fam = rotation_sequence_family()
    with pytest.raises(ValidationError, match="ratio"):
        estimate_G(fam, 4, (1e-3, 5e-4))
    with pytest.warns(RuntimeWarning, match="n\\^2 r"):
        estimate_G(fam, 10, (1e-2, 1e-3))


def test_contribution_of_same_axis_sequence_is_linear():
    fam = rotation_sequence_family()
    ns = [4, 8, 16, 32, 64]
    deltas = [contribution_delta(fam, 2, n, default_r_values(n)) for n in ns]
    assert deltas == pytest.approx([2 * n + 1 for n in ns], rel=1e-4)
    fit = wls_quadratic_fit([(n, d, 0.0) for n, d in zip(ns, deltas)])
    assert abs(fit.a) <= 1e-8


def test_twirled_contribution_is_constant():
    rep = contribution_report(rotation_sequence_family(), 2, [4, 8, 16, 32], twirl=[2])
    assert np.ptp(rep.delta) < 1e-3 * np.mean(rep.delta)
    assert abs(rep.fitted_order) < 0.1


def test_dF_slope_matches_two_theta_squared():
    fam = rotation_sequence_family()
    r = 1e-6
    th = rotation_angle(r)

    def dF(n):
        return fidelity(fam, n, r, omit=0) - fidelity(fam, n, r)

    ns = np.array([0, 5, 10, 20])
    slope = np.polyfit(ns, [dF(n) - dF(0) for n in ns], 1)[0]
    assert slope == pytest.approx(2 * th * th, rel=0.05)


def test_loglog_order_of_power_law():
    ns = [4, 8, 16, 32]
    order, se = fit_loglog_order(ns, [3.0 * n ** 1.5 for n in ns])
    assert order == pytest.approx(1.5)
    assert se < 1e-10
    with pytest.raises(ValidationError):
        fit_loglog_order(ns, [0, 1, 2, 3])


def test_report_to_dict_keys():
    rep = contribution_report(rotation_sequence_family(), 1, [4, 8, 16])
    assert set(rep.to_dict()) >= {"n_values", "G", "G_j", "delta", "fitted_order", "order_stderr"}


def test_custom_family_width_cap():
    fam = NestedFamily(width=lambda n: n + 1, step=lambda q: (np.eye(2), (0,)), channel=lambda q, r: None)
    with pytest.raises(SizeLimitError, match="cap"):
        fidelity(fam, 12, 1e-3)


# --------------------------------------------------------------------------- preparation test


def _prep(theta, axis):
    return NoisyPrep.rotated(rotation_unitary(theta, axis))


def test_ideal_prep_gives_zero():
    res = run_prep_protocol(PrepProtocolConfig(10, 0.02, NoisyPrep()))
    assert res.estimate.theta_h_x == pytest.approx(0, abs=1e-14)
    assert res.estimate.theta_h_y == pytest.approx(0, abs=1e-14)
    assert res.estimate.h is None


def test_prep_axis_swap():
    x = run_prep_protocol(PrepProtocolConfig(10, 0.02, _prep(0.01, (1, 0, 0)))).estimate
    y = run_prep_protocol(PrepProtocolConfig(10, 0.02, _prep(0.01, (0, 1, 0)))).estimate
    assert y.theta_h_y == pytest.approx(x.theta_h_x, rel=1e-9)
    assert abs(y.theta_h_x) < 1e-3


def test_prep_difference_linear_in_n():
    prep = _prep(0.01, (1, 0, 0))
    phi = 0.0075

    def diff(n):
        p = lambda c: simulate_distribution(compile_with_twirl(c, "exact"))["0"]
        tn = p(prep_circuit(n, phi, "X", prep, None, True)) - p(prep_circuit(n, phi, "X", prep, None, False))
        t0 = p(prep_circuit(0, phi, "X", prep, None, True)) - p(prep_circuit(0, phi, "X", prep, None, False))
        return tn - t0

    ratios = [diff(n) / n for n in (5, 10, 20)]
    assert max(ratios) / min(ratios) - 1 < 0.02


def test_prep_config_limits():
    with pytest.raises(ValidationError):
        PrepProtocolConfig(10, 0.1, NoisyPrep())
    with pytest.warns(RuntimeWarning):
        PrepProtocolConfig(10, 0.06, NoisyPrep())


def test_prep_sampled_mode_reproducible():
    cfg = PrepProtocolConfig(10, 0.02, _prep(0.01, (1, 0, 0)), shots=100_000, seed=4)
    assert run_prep_protocol(cfg).probabilities == run_prep_protocol(cfg).probabilities


# --------------------------------------------------------------------------- location test


def _chain(noise, n=6):
    g = NoisyGate("I", np.eye(2), noise)
    return CircuitSpec(1, tuple([Prep(0)] + [Gate((0,), g) for _ in range(n)] + [FinalMeasure((0,))]))


def test_bhattacharyya():
    assert bhattacharyya_fidelity({"0": 1.0}, {"0": 1.0}) == 1.0
    assert bhattacharyya_fidelity({"0": 1.0}, {"1": 1.0}) == 0.0
    assert bhattacharyya_fidelity({"0": 0.5, "1": 0.5}, {"0": 1.0}) == pytest.approx(0.5)


def test_coherent_chain_flagged():
    rep = location_coherence_test(_chain(rotation(0.05, (1, 0, 0))), 3, range(1, 7))
    assert rep.verdict
    assert rep.delta_F > 0


def test_stochastic_chain_not_flagged():
    rep = location_coherence_test(_chain(dephasing(0.01)), 3, range(1, 7))
    assert not rep.verdict


def test_stochastic_two_qubit_circuit_not_flagged():
    cnot = NoisyGate.standard("CNOT", pauli_twirl(unitary(np.cos(0.1) * np.eye(4) + 1j * np.sin(0.1) * np.kron(Z, X))))
    h = NoisyGate.standard("H", depolarizing(0.01))
    c = CircuitSpec(2, (Prep(0), Prep(1), Gate((0,), h), Gate((0, 1), cnot), Gate((0, 1), cnot), Gate((0,), h),
                        FinalMeasure((0, 1))))
    rep = location_coherence_test(c, 3, [2, 3, 4, 5])
    assert not rep.verdict
    assert rep.delta_F == pytest.approx(0, abs=1e-12)


def test_noiseless_chain():
    rep = location_coherence_test(_chain(None), 3, range(1, 7))
    assert (rep.F_jT, rep.F_j, rep.F, rep.delta_F) == (1.0, 1.0, 1.0, 0.0)
    assert not rep.verdict


def test_location_preconditions():
    with pytest.raises(ValidationError, match="must belong"):
        location_coherence_test(_chain(None), 3, [1, 2])
    g = NoisyGate("T", np.diag([1, np.exp(1j * np.pi / 4)]))
    c = CircuitSpec(1, (Prep(0), Gate((0,), g), FinalMeasure((0,))))
    with pytest.raises(ValidationError, match="Clifford"):
        location_coherence_test(c, 1, [1])
