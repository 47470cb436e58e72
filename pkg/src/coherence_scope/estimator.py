"""Quadratic fits of error rate against ``n`` and extraction of coherent-error parameters.

The regression core follows the scikit-learn estimator conventions so it can be
used in pipelines and cross-validation; the protocol-level helpers are plain
functions returning small dataclasses.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array

from .exceptions import ValidationError

Z_QUADRATIC = 5.0
Z_LINEAR = 2.0
PRACTICAL_FLOOR = 0.1


def _design(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float).reshape(-1)
    return np.column_stack([n * n, n, np.ones_like(n)])


class WeightedQuadraticRegressor(RegressorMixin, BaseEstimator):
    """Fit ``y = a n**2 + b n + c`` by weighted least squares.

    With ``sample_weight=None`` the points are treated as exact (uniform weights)
    and the covariance is scaled by the residual variance ``RSS / (N - 3)``.
    With weights ``1 / stderr**2`` the covariance is ``(X^T W X)^{-1}``.

    Attributes
    ----------
    coef_ : ndarray of shape (3,)
        ``(a, b, c)``.
    covariance_ : ndarray of shape (3, 3)
    residual_norm_ : float
        Weighted residual norm ``sqrt(sum w r**2)``.
    weights_ : ndarray
    """

    def __init__(self, min_distinct: int = 4):
        self.min_distinct = min_distinct

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, ensure_2d=False, y_numeric=True)
        n = np.asarray(X, dtype=float).reshape(-1)
        if np.unique(n).size < self.min_distinct:
            raise ValidationError(
                f"quadratic fit needs at least {self.min_distinct} distinct n values, got {np.unique(n).size}"
            )
        design = _design(n)
        statistical = sample_weight is not None
        w = np.ones_like(y) if not statistical else np.asarray(sample_weight, dtype=float)
        if w.shape != y.shape or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValidationError("sample weights must be positive, finite and one per point")
        sw = np.sqrt(w)
        normal = design.T @ (w[:, None] * design)
        try:
            inv = np.linalg.inv(normal)
        except np.linalg.LinAlgError as exc:
            raise ValidationError("singular design matrix") from exc
        coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
        resid = (y - design @ coef) * sw
        rss = float(resid @ resid)
        dof = y.size - 3
        cov = inv if statistical else inv * (rss / dof)
        self.coef_ = coef
        self.covariance_ = (cov + cov.T) / 2
        self.residual_norm_ = float(np.sqrt(rss))
        self.weights_ = w
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, ensure_2d=False)
        return _design(X) @ self.coef_


@dataclass(frozen=True)
class FitReport:
    a: float
    b: float
    c: float
    covariance: np.ndarray
    residual_norm: float
    weights: np.ndarray
    n_values: tuple[int, ...]

    @property
    def sigma_a(self) -> float:
        return float(np.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def n_max(self) -> int:
        return max(self.n_values)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "cov": self.covariance.tolist()}


def binomial_weight(p: float, shots: int) -> float:
    """``1 / var`` with the ``(k + 1/2) / (N + 1)`` floor so that zero counts keep a finite weight."""
    k = p * shots
    q = (k + 0.5) / (shots + 1)
    return shots / (q * (1 - q))


def wls_quadratic_fit(points: Sequence[tuple]) -> FitReport:
    """Fit ``(n, p_error, stderr)`` or ``(n, p_error, stderr, shots)`` triples.

    Points with ``stderr == 0`` and no shots are exact; if every point is exact the
    fit uses uniform weights. Statistical points use ``1 / stderr**2``, with a
    binomial floor when a shot count is available.
    """
    pts = [tuple(p) for p in points]
    if len(pts) < 4:
        raise ValidationError(f"quadratic fit needs at least 4 points, got {len(pts)}")
    n = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    shots = [int(p[3]) if len(p) > 3 and p[3] else 0 for p in pts]
    se = np.array([p[2] if len(p) > 2 and p[2] is not None else 0.0 for p in pts], dtype=float)
    if all(s == 0 for s in shots) and np.all(se == 0):
        weights = None
    else:
        weights = np.array([binomial_weight(yi, s) if s > 0 else (1 / si ** 2 if si > 0 else np.nan)
                            for yi, s, si in zip(y, shots, se)])
        if np.any(np.isnan(weights)):
            raise ValidationError("cannot mix exact points with statistical points in one fit")
    model = WeightedQuadraticRegressor().fit(n, y, sample_weight=weights)
    a, b, c = (float(v) for v in model.coef_)
    return FitReport(a, b, c, model.covariance_, model.residual_norm_, model.weights_,
                     tuple(int(v) for v in n))


def classify_accumulation(fit: FitReport, z_quadratic: float = Z_QUADRATIC, z_linear: float = Z_LINEAR,
                          practical_floor: float = PRACTICAL_FLOOR) -> str:
    """``"quadratic"``, ``"linear"`` or ``"inconclusive"`` from the fitted ``a`` and its error."""
    sa = fit.sigma_a
    if fit.a <= z_linear * sa:
        return "linear"
    significant = fit.a * fit.n_max ** 2 > practical_floor * abs(fit.b) * fit.n_max
    if fit.a > z_quadratic * sa and significant:
        return "quadratic"
    return "inconclusive"


@dataclass
class CoherenceEstimate:
    theta2: float
    v2: dict[str, float]
    stderr: dict[str, float]
    verdict: str
    basis_verdicts: dict[str, str]
    fits: dict[str, FitReport] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fits": {k: f.to_dict() for k, f in self.fits.items()},
            "theta2": self.theta2,
            "v2": self.v2,
            "stderr": self.stderr,
            "verdict": self.verdict,
            "basis_verdicts": self.basis_verdicts,
            "warnings": self.warnings,
        }


def _combine_verdicts(verdicts: Mapping[str, str]) -> str:
    vals = set(verdicts.values())
    if "quadratic" in vals:
        return "quadratic"
    if vals == {"linear"}:
        return "linear"
    return "inconclusive"


def _extract(fits: Mapping[str, FitReport], labels: Sequence[str], fixed_zero: Sequence[str] = ()) -> CoherenceEstimate:
    missing = [b for b in labels if b not in fits]
    if missing:
        raise ValidationError(f"missing fits for bases {missing}")
    grids = {tuple(sorted(fits[b].n_values)) for b in labels}
    if len(grids) > 1:
        raise ValidationError("fits must share the same n grid")
    notes = []
    a = {}
    for b in labels:
        if fits[b].a < 0:
            notes.append(f"negative a_{b} = {fits[b].a:.3e} clamped to 0")
            a[b] = 0.0
        else:
            a[b] = fits[b].a
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    var = {b: fits[b].sigma_a ** 2 for b in labels}
    theta2 = float(sum(a.values()))
    stderr = {"theta2": float(np.sqrt(sum(var.values())))}
    verdicts = {b: classify_accumulation(fits[b]) for b in labels}
    verdict = _combine_verdicts(verdicts)
    v2: dict[str, float] = {}
    if theta2 > 0:
        for b in labels:
            v2[b] = a[b] / theta2
            grad = {q: ((theta2 - a[b]) if q == b else -a[b]) / theta2 ** 2 for q in labels}
            stderr[f"v2_{b}"] = float(np.sqrt(sum(grad[q] ** 2 * var[q] for q in labels)))
        for b in fixed_zero:
            v2[b] = 0.0
    else:
        verdict = "linear"
    return CoherenceEstimate(theta2, v2, stderr, verdict, verdicts, dict(fits), notes)


def extract_channel_params(fits: Mapping[str, FitReport]) -> CoherenceEstimate:
    """``theta^2 = a_X + a_Y + a_Z`` and ``v_P^2 = a_P / theta^2``."""
    return _extract(fits, ("X", "Y", "Z"))


def extract_measurement_params(fits: Mapping[str, FitReport]) -> CoherenceEstimate:
    """As :func:`extract_channel_params` from the X and Y bases only, with ``v_Z = 0``."""
    return _extract(fits, ("X", "Y"), fixed_zero=("Z",))


@dataclass(frozen=True)
class PrepEstimate:
    theta_h_x: float
    theta_h_y: float
    theta: float
    h: tuple[float, float] | None

    def to_dict(self) -> dict:
        return {"theta_h_x": self.theta_h_x, "theta_h_y": self.theta_h_y, "theta": self.theta,
                "h": None if self.h is None else list(self.h)}


def extract_prep_params(p: Mapping[str, float], n: int, phi: float, noise_floor: float = 1e-12) -> PrepEstimate:
    """Preparation rotation components from the six probabilities of outcome 0.

    ``p`` has keys ``t0, 0`` (no waiting, with and without a twirled preparation) and
    ``tnX, nX, tnY, nY`` (``n`` artificial rotations by ``phi`` about X or Y).
    Each difference ``(P^t_n - P_n) - (P^t_0 - P_0)`` equals ``2 n phi theta h``
    to leading order.
    """
    if n * phi >= 1:
        raise ValidationError(f"n*phi = {n * phi:.3g} must be < 1")
    if n <= 0 or phi == 0:
        raise ValidationError("n and phi must be nonzero")
    base = p["t0"] - p["0"]
    scale = 2 * n * phi
    thx = ((p["tnX"] - p["nX"]) - base) / scale
    thy = ((p["tnY"] - p["nY"]) - base) / scale
    theta = float(np.hypot(thx, thy))
    h = (thx / theta, thy / theta) if theta > noise_floor else None
    return PrepEstimate(float(thx), float(thy), theta, h)


class CoherentErrorEstimator(BaseEstimator):
    """Estimate ``theta^2`` and ``v_P^2`` from per-basis error-rate curves.

    ``fit`` takes ``X`` with columns ``(basis_index, n)`` (basis index 0, 1, 2 for
    X, Y, Z) and ``y`` the odd-parity rates. Optional ``shots`` turns on binomial
    weighting.
    """

    def __init__(self, protocol: str = "channel", z_quadratic: float = Z_QUADRATIC,
                 z_linear: float = Z_LINEAR, practical_floor: float = PRACTICAL_FLOOR):
        self.protocol = protocol
        self.z_quadratic = z_quadratic
        self.z_linear = z_linear
        self.practical_floor = practical_floor

    def fit(self, X, y, shots=None):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.protocol not in ("channel", "measurement"):
            raise ValidationError(f"protocol must be 'channel' or 'measurement', got {self.protocol!r}")
        labels = ("X", "Y", "Z") if self.protocol == "channel" else ("X", "Y")
        shots = np.zeros(y.size, dtype=int) if shots is None else np.asarray(shots, dtype=int)
        fits = {}
        for idx, lab in enumerate("XYZ"):
            if lab not in labels:
                continue
            sel = X[:, 0] == idx
            pts = [(X[i, 1], y[i], 0.0, shots[i]) for i in np.flatnonzero(sel)]
            fits[lab] = wls_quadratic_fit(pts)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = extract_channel_params(fits) if self.protocol == "channel" else extract_measurement_params(fits)
        verdicts = {b: classify_accumulation(f, self.z_quadratic, self.z_linear, self.practical_floor)
                    for b, f in fits.items()}
        est.basis_verdicts = verdicts
        if est.theta2 > 0:
            est.verdict = _combine_verdicts(verdicts)
        self.estimate_ = est
        self.theta2_ = est.theta2
        self.v2_ = dict(est.v2)
        self.verdict_ = est.verdict
        return self

    def to_json(self) -> str:
        check_is_fitted(self, "estimate_")
        return json.dumps(self.estimate_.to_dict(), indent=2, sort_keys=True)
