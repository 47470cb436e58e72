"""Accumulation of noise along nested circuit families, per-location contributions,
the preparation-noise test with artificial rotations, and the single-location
coherence test for a fixed circuit.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .channels import KrausChannel, apply_channel, apply_operator, pauli_twirl, rotation, rotation_unitary
from .circuits import (CircuitSpec, FinalMeasure, Gate, NoisyGate, NoisyMeasurement, NoisyPrep, Prep,
                       compile_with_twirl, simulate_distribution)
from .estimator import PrepEstimate, extract_prep_params
from .exceptions import SizeLimitError, ValidationError
from .sampling import derive_rng, sample_shots

MAX_QUBITS = 10

Step = tuple[np.ndarray, tuple[int, ...]]
Location = tuple[KrausChannel, tuple[int, ...]]


@dataclass(frozen=True)
class NestedFamily:
    """Circuits ``Q_n = U_n ... U_1 U_0 |0...0>`` with a noise location after every ``U_q``.

    ``width(n)`` is the number of qubits of ``Q_n``; ``step(q)`` returns ``U_q`` and the
    qubits it acts on; ``channel(q, r)`` returns the noise at location ``q`` for scale
    ``r`` (or ``None`` for a noiseless location).
    """

    width: Callable[[int], int]
    step: Callable[[int], Step]
    channel: Callable[[int, float], Location | None]
    name: str = "family"

    def ideal_state(self, n: int) -> np.ndarray:
        k = self._width(n)
        psi = np.zeros(2 ** k, dtype=complex)
        psi[0] = 1
        for q in range(n + 1):
            u, targets = self.step(q)
            psi = _apply_vector(u, psi, targets, k)
        return psi

    def _width(self, n: int) -> int:
        k = self.width(n)
        if k > MAX_QUBITS:
            raise SizeLimitError(f"family member n={n} needs {k} qubits (cap {MAX_QUBITS})")
        return k


def _apply_vector(u: np.ndarray, psi: np.ndarray, targets: Sequence[int], k: int) -> np.ndarray:
    m = len(targets)
    t = psi.reshape((2,) * k)
    t = np.tensordot(u.reshape((2,) * (2 * m)), t, axes=(list(range(m, 2 * m)), list(targets)))
    return np.moveaxis(t, list(range(m)), list(targets)).reshape(-1)


def fidelity(family: NestedFamily, n: int, r: float, omit: int | None = None,
             twirl: Sequence[int] = ()) -> float:
    """``<psi_n| rho_{n,r} |psi_n>``, optionally without location ``omit`` and with the
    noise at locations in ``twirl`` replaced by its Pauli twirl."""
    k = family._width(n)
    rho = np.zeros((2 ** k, 2 ** k), dtype=complex)
    rho[0, 0] = 1
    tw = set(twirl)
    for q in range(n + 1):
        u, targets = family.step(q)
        rho = apply_operator(u, rho, targets, k)
        if q == omit:
            continue
        loc = family.channel(q, r)
        if loc is None:
            continue
        ch, where = loc
        if q in tw:
            ch = pauli_twirl(ch)
        rho = apply_channel(ch, rho, where, k, 2)
    psi = family.ideal_state(n)
    return float(np.real(psi.conj() @ rho @ psi))


@dataclass(frozen=True)
class GEstimate:
    value: float
    raw: tuple[float, float]
    r_values: tuple[float, float]
    reliable: bool


def _check_r(n: int, r_values: Sequence[float]) -> tuple[float, float]:
    r1, r2 = sorted((float(r) for r in r_values), reverse=True)
    if r2 <= 0 or r1 / r2 < 4:
        raise ValidationError(f"need two positive r values with ratio >= 4, got {list(r_values)}")
    if n * n * r1 >= 0.1:
        warnings.warn(f"n^2 r = {n * n * r1:.3g} is not small; extrapolation may be poor", RuntimeWarning, stacklevel=3)
    return r1, r2


def _extrapolate(g1: float, g2: float, r1: float, r2: float, rel_tol: float) -> GEstimate:
    value = g2 + (g2 - g1) * r2 / (r1 - r2)
    scale = max(abs(value), abs(g1), abs(g2), 1e-300)
    return GEstimate(float(value), (g1, g2), (r1, r2), abs(g1 - g2) <= rel_tol * scale or abs(g1 - g2) < 1e-12)


def estimate_G(family: NestedFamily, n: int, r_values: Sequence[float], omit: int | None = None,
               twirl: Sequence[int] = (), rel_tol: float = 0.05) -> GEstimate:
    """``lim_{r -> 0} (1 - F(n, r)) / r`` by linear Richardson extrapolation from two ``r`` values."""
    r1, r2 = _check_r(n, r_values)
    g1 = (1 - fidelity(family, n, r1, omit, twirl)) / r1
    g2 = (1 - fidelity(family, n, r2, omit, twirl)) / r2
    return _extrapolate(g1, g2, r1, r2, rel_tol)


def contribution_delta(family: NestedFamily, j: int, n: int, r_values: Sequence[float],
                       twirl: Sequence[int] = ()) -> float:
    """``Delta_j(n) = G(n) - G^j(n)``: the accumulated infidelity attributable to location ``j``."""
    if not 0 <= j <= n:
        raise ValidationError(f"location {j} is not in a circuit with locations 0..{n}")
    full = estimate_G(family, n, r_values, twirl=twirl)
    without = estimate_G(family, n, r_values, omit=j, twirl=twirl)
    return full.value - without.value


def fit_loglog_order(n_values: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Slope and its standard error of ``log|values|`` against ``log n``."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.asarray(values, dtype=float)
    if np.any(y == 0):
        raise ValidationError("cannot fit a log-log order to zero values")
    res = stats.linregress(x, np.log(np.abs(y)))
    return float(res.slope), float(res.stderr)


@dataclass
class ContributionReport:
    n_values: list[int]
    G: list[float]
    G_j: list[float]
    delta: list[float]
    fitted_order: float
    order_stderr: float
    reliable: bool = True

    def to_dict(self) -> dict:
        return {"n_values": self.n_values, "G": self.G, "G_j": self.G_j, "delta": self.delta,
                "fitted_order": self.fitted_order, "order_stderr": self.order_stderr, "reliable": self.reliable}


def default_r_values(n: int, base: float = 0.01) -> tuple[float, float]:
    """Per-``n`` scales keeping ``n^2 r`` at ``base`` and ``base / 4``."""
    r1 = base / max(n, 1) ** 2
    return r1, r1 / 4


def contribution_report(family: NestedFamily, j: int, n_values: Sequence[int],
                        r_values: Callable[[int], Sequence[float]] = default_r_values,
                        twirl: Sequence[int] = ()) -> ContributionReport:
    gs, gjs, deltas, ok = [], [], [], True
    for n in n_values:
        rv = r_values(n)
        g = estimate_G(family, n, rv, twirl=twirl)
        gj = estimate_G(family, n, rv, omit=j, twirl=twirl)
        gs.append(g.value)
        gjs.append(gj.value)
        deltas.append(g.value - gj.value)
        ok &= g.reliable and gj.reliable
    order, se = fit_loglog_order(n_values, deltas)
    return ContributionReport(list(map(int, n_values)), gs, gjs, deltas, order, se, ok)


# --------------------------------------------------------------------------- standard families


def rotation_angle(r: float) -> float:
    """Angle whose rotation has worst-case infidelity ``r`` (``sin^2 theta = r``)."""
    return float(np.arcsin(np.sqrt(r)))


def rotation_sequence_family(axis: Sequence[float] = (1, 0, 0), weights: Callable[[int], float] | None = None
                             ) -> NestedFamily:
    """One qubit in ``|0>`` waiting ``n`` steps; location ``q`` rotates by ``w_q * theta(r)`` about ``axis``."""
    eye = np.eye(2, dtype=complex)
    w = weights or (lambda q: 1.0)
    return NestedFamily(
        width=lambda n: 1,
        step=lambda q: (eye, (0,)),
        channel=lambda q, r: (rotation(w(q) * rotation_angle(r), axis), (0,)),
        name="rotation-sequence",
    )


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def ghz_family(channel: Callable[[float], KrausChannel]) -> NestedFamily:
    """``Q_0`` makes a Bell pair on qubits 0, 1; ``U_q`` is a CNOT from qubit ``q`` to ``q + 1``.
    Location ``q`` applies ``channel(r)`` to qubit ``q``."""
    bell = _CNOT @ np.kron(_H, np.eye(2))

    def step(q):
        return (bell, (0, 1)) if q == 0 else (_CNOT, (q, q + 1))

    return NestedFamily(width=lambda n: n + 2, step=step, channel=lambda q, r: (channel(r), (q,)), name="ghz")


# --------------------------------------------------------------------------- preparation test


@dataclass(frozen=True)
class PrepProtocolConfig:
    n: int
    phi: float
    prep: NoisyPrep
    meas: NoisyMeasurement | None = None
    shots: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.n * self.phi >= 1.0:
            raise ValidationError(f"n*phi = {self.n * self.phi:.3g} must be < 1")
        if self.n * self.phi >= 0.5:
            warnings.warn(f"n*phi = {self.n * self.phi:.3g} is not small", RuntimeWarning, stacklevel=3)


def prep_circuit(n: int, phi: float, axis: str, prep: NoisyPrep, meas: NoisyMeasurement | None,
                 twirl_prep: bool) -> CircuitSpec:
    """Prepare, apply ``n`` separate rotations ``exp(i phi sigma_axis)``, measure (measurement twirled)."""
    v = {"X": (1, 0, 0), "Y": (0, 1, 0)}[axis]
    rot = NoisyGate(f"R{axis}", rotation_unitary(phi, v), None, twirlable=False)
    els = [Prep(0, prep, twirl_prep)] + [Gate((0,), rot) for _ in range(n)]
    els.append(FinalMeasure((0,), "Z", meas, True))
    return CircuitSpec(1, tuple(els))


def _p0(circuit: CircuitSpec) -> float:
    return simulate_distribution(compile_with_twirl(circuit, "exact"))["0"]


@dataclass
class PrepProtocolResult:
    probabilities: dict[str, float]
    estimate: PrepEstimate
    n: int
    phi: float

    def to_dict(self) -> dict:
        return {"n": self.n, "phi": self.phi, "probabilities": self.probabilities, **self.estimate.to_dict()}


def run_prep_protocol(cfg: PrepProtocolConfig) -> PrepProtocolResult:
    """Six outcome-0 probabilities (twirled / untwirled preparation, ``n = 0`` and ``n`` rotations
    about X and about Y) and the preparation rotation they imply."""
    variants = {
        "t0": (0, "X", True), "0": (0, "X", False),
        "tnX": (cfg.n, "X", True), "nX": (cfg.n, "X", False),
        "tnY": (cfg.n, "Y", True), "nY": (cfg.n, "Y", False),
    }
    probs = {}
    for i, (key, (n, axis, tw)) in enumerate(variants.items()):
        p = _p0(prep_circuit(n, cfg.phi, axis, cfg.prep, cfg.meas, tw))
        if cfg.shots > 0:
            p = sample_shots(min(max(p, 0.0), 1.0), cfg.shots, derive_rng(cfg.seed, "prep", i, n)) / cfg.shots
        probs[key] = p
    return PrepProtocolResult(probs, extract_prep_params(probs, cfg.n, cfg.phi), cfg.n, cfg.phi)


# --------------------------------------------------------------------------- single-location test


def bhattacharyya_fidelity(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    keys = set(p) | set(q)
    f = sum(np.sqrt(max(p.get(k, 0.0), 0.0) * max(q.get(k, 0.0), 0.0)) for k in keys) ** 2
    return float(min(f, 1.0))


@dataclass
class LocationReport:
    F_jT: float
    F_j: float
    F: float
    delta_F: float
    kappa: float
    verdict: bool
    distributions: dict[str, dict[str, float]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"F_jT": self.F_jT, "F_j": self.F_j, "F": self.F, "delta_F": self.delta_F,
                "kappa": self.kappa, "coherent_contribution": self.verdict}


def location_coherence_test(circuit: CircuitSpec, j: int, T: Sequence[int], kappa: float = 5.0,
                            atol: float = 1e-12) -> LocationReport:
    """Compare output distributions with location ``j`` and the set ``T`` twirled or not.

    ``j`` contributes coherently when ``F^j - F > kappa (1 - F^{j,T})``; differences
    below ``atol`` count as zero.
    """
    T = sorted(set(int(t) for t in T))
    if j not in T:
        raise ValidationError(f"location {j} must belong to T")

    def dist(locs):
        return simulate_distribution(compile_with_twirl(circuit, "exact", locations=locs))

    x_jt = dist(T)
    x_t = dist([t for t in T if t != j])
    x_j = dist([j])
    x = dist([])
    return location_report({"jT": x_jt, "T": x_t, "j": x_j, "none": x}, kappa, atol)


def location_report(dists: Mapping[str, Mapping[str, float]], kappa: float = 5.0, atol: float = 1e-12) -> LocationReport:
    """Verdict from the four distributions keyed ``jT``, ``T``, ``j`` and ``none``."""
    f_jt = bhattacharyya_fidelity(dists["T"], dists["jT"])
    f_j = bhattacharyya_fidelity(dists["j"], dists["T"])
    f = bhattacharyya_fidelity(dists["none"], dists["T"])
    delta = f_j - f
    return LocationReport(f_jt, f_j, f, delta, kappa, bool(delta > max(kappa * (1 - f_jt), atol)),
                          {k: dict(v) for k, v in dists.items()})
