import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.model_selection import cross_val_score

from coherence_scope.channels import dephasing, rotation
from coherence_scope.estimator import (
    CoherentErrorEstimator, WeightedQuadraticRegressor, binomial_weight, classify_accumulation,
    extract_channel_params, extract_prep_params, wls_quadratic_fit,
)
from coherence_scope.exceptions import ValidationError
from coherence_scope.ghz import GhzExperiment, run_channel_protocol
from coherence_scope.sampling import BASIS_INDEX

coef = st.floats(-1e-2, 1e-2, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(coef, coef, coef)
def test_noiseless_polynomial_recovered(a, b, c):
    n = np.arange(2, 13, dtype=float)
    fit = wls_quadratic_fit([(x, a * x * x + b * x + c, 0.0) for x in n])
    assert fit.a == pytest.approx(a, abs=1e-12)
    assert fit.b == pytest.approx(b, abs=1e-12)
    assert fit.c == pytest.approx(c, abs=1e-12)


def test_weighted_covariance_is_inverse_fisher():
    n = np.array([2, 4, 6, 8, 10], dtype=float)
    se = np.full(5, 1e-3)
    fit = wls_quadratic_fit([(x, 1e-4 * x, s) for x, s in zip(n, se)])
    design = np.column_stack([n * n, n, np.ones(5)])
    assert np.allclose(fit.covariance, np.linalg.inv(design.T @ design / 1e-6))


def test_too_few_points():
    with pytest.raises(ValidationError):
        wls_quadratic_fit([(2, 0.1, 0), (3, 0.2, 0), (4, 0.3, 0)])
    with pytest.raises(ValidationError, match="distinct"):
        WeightedQuadraticRegressor().fit(np.array([2, 2, 3, 3, 4]), np.zeros(5))


def test_binomial_weight_floor_finite_at_zero_counts():
    assert np.isfinite(binomial_weight(0.0, 1000))
    assert binomial_weight(0.5, 1000) == pytest.approx(1000 / 0.25, rel=0.01)


def test_sklearn_conventions():
    est = WeightedQuadraticRegressor(min_distinct=5)
    assert clone(est).get_params() == {"min_distinct": 5}
    n = np.arange(2, 30, dtype=float).reshape(-1, 1)
    y = 1e-4 * n.ravel() ** 2 + 1e-3 * n.ravel()
    scores = cross_val_score(WeightedQuadraticRegressor(), n, y, cv=3)
    assert np.all(scores > 0.999)
    fitted = WeightedQuadraticRegressor().fit(n, y)
    assert np.allclose(fitted.predict(n), y)


def test_classification_rules():
    n = np.arange(2, 13, dtype=float)
    quad = wls_quadratic_fit([(x, 4e-4 * x * x + 1e-3 * x + 1e-9 * np.sin(x), 0) for x in n])
    lin = wls_quadratic_fit([(x, 2e-3 * x + 1e-9 * np.sin(x), 0) for x in n])
    tiny = wls_quadratic_fit([(x, 1e-9 * x * x + 1e-2 * x + 1e-12 * np.sin(x), 0) for x in n])
    assert classify_accumulation(quad) == "quadratic"
    assert classify_accumulation(lin) == "linear"
    assert classify_accumulation(tiny) == "inconclusive"


def _fits_for(channel, ns=range(2, 17, 2)):
    rows = run_channel_protocol(GhzExperiment(channel, tuple(ns)))
    return {b: wls_quadratic_fit([(r.n, r.p_error, 0.0) for r in rows if r.basis == b]) for b in "XYZ"}


def test_channel_extraction_pure_z_rotation():
    est = extract_channel_params(_fits_for(rotation(0.02, (0, 0, 1)), range(2, 13)))
    assert est.theta2 == pytest.approx(4e-4, rel=0.05)
    assert est.v2["Z"] == pytest.approx(1.0, abs=0.01)
    assert est.verdict == "quadratic"


def test_negative_coefficient_clamped_with_warning():
    with pytest.warns(RuntimeWarning, match="clamped"):
        est = extract_channel_params(_fits_for(rotation(0.02, (0.6, 0, 0.8))))
    assert all(v >= 0 for v in est.v2.values())
    assert est.warnings


def test_stochastic_channel_is_linear():
    with pytest.warns(RuntimeWarning):
        est = extract_channel_params(_fits_for(dephasing(0.001)))
    assert est.verdict == "linear"


def test_estimator_api_on_rows():
    rows = run_channel_protocol(GhzExperiment(rotation(0.02, (0, 0, 1)), tuple(range(2, 13)), shots=10**6, seed=1))
    X = np.array([[BASIS_INDEX[r.basis], r.n] for r in rows])
    y = np.array([r.p_error for r in rows])
    est = CoherentErrorEstimator().fit(X, y, shots=[r.shots for r in rows])
    assert est.verdict_ == "quadratic"
    assert est.v2_["Z"] > 0.9
    assert '"theta2"' in est.to_json()
    with pytest.raises(ValidationError):
        CoherentErrorEstimator(protocol="prep").fit(X, y)


def test_prep_extraction_scaling():
    p = {"t0": 0.9, "0": 0.9, "tnX": 0.95, "nX": 0.95 - 0.004, "tnY": 0.95, "nY": 0.95}
    est = extract_prep_params(p, 10, 0.02)
    assert est.theta_h_x == pytest.approx(0.004 / (2 * 10 * 0.02))
    assert est.theta_h_y == 0
    with pytest.raises(ValidationError):
        extract_prep_params(p, 100, 0.02)
