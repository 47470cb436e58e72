"""Density-matrix simulation of GHZ parity circuits with noisy gates, preparations
and measurements, mid-circuit measure/reset, and Pauli-frame twirling.

Measurements never branch the state: a :class:`ParityState` keeps one
unnormalized density matrix per accumulated parity, so a circuit with many
measure/reset cycles costs the same as one without.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .channels import (I2, X, Y, Z, KrausChannel, apply_channel, apply_operator, channel_from_spec,
                       matrix_from_json, matrix_to_json, pauli_labels, pauli_string, pauli_twirl)
from .exceptions import SimulationError, SizeLimitError, ValidationError
from .ghz import GhzBasis, GhzResultRow, as_basis, make_row
from .sampling import derive_rng, ordered_map

MAX_LIVE_QUBITS = 10
KET0 = np.array([[1, 0], [0, 0]], dtype=complex)

H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_GATE = np.diag([1, 1j])
CNOT_GATE = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
STANDARD_GATES = {
    "I": I2, "X": X, "Y": Y, "Z": Z, "H": H_GATE, "S": S_GATE, "Sdg": S_GATE.conj().T,
    "CNOT": CNOT_GATE,
}


# --------------------------------------------------------------------------- noisy components


def _is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= atol


def is_clifford(u: np.ndarray) -> bool:
    """True if ``u P u^dagger`` is a signed Pauli string for every Pauli ``P``."""
    k = int(np.log2(u.shape[0]))
    strings = [pauli_string(lab) for lab in pauli_labels(k)]
    for p in strings[1:]:
        c = u @ p @ u.conj().T
        if not any(np.allclose(c, s * sign, atol=1e-9) for s in strings for sign in (1, -1)):
            return False
    return True


@dataclass(frozen=True)
class NoisyGate:
    """Ideal unitary followed by a noise channel on the same qubits."""

    name: str
    ideal: np.ndarray
    noise: KrausChannel | None = None
    twirlable: bool = True

    def __post_init__(self):
        u = np.array(self.ideal, dtype=complex)
        u.setflags(write=False)
        object.__setattr__(self, "ideal", u)
        if u.shape not in ((2, 2), (4, 4)) or not _is_unitary(u):
            raise ValidationError(f"gate {self.name!r}: ideal must be a 1- or 2-qubit unitary")
        if self.noise is not None and self.noise.dim != u.shape[0]:
            raise ValidationError(f"gate {self.name!r}: noise dimension {self.noise.dim} != {u.shape[0]}")

    @property
    def n_qubits(self) -> int:
        return 1 if self.ideal.shape[0] == 2 else 2

    @classmethod
    def standard(cls, name: str, noise: KrausChannel | None = None) -> "NoisyGate":
        try:
            return cls(name, STANDARD_GATES[name], noise)
        except KeyError:
            raise ValidationError(f"unknown gate {name!r}; known: {sorted(STANDARD_GATES)}") from None

    def dagger(self, noise: KrausChannel | None = None) -> "NoisyGate":
        return NoisyGate(self.name + "^dag", self.ideal.conj().T, noise, self.twirlable)

    def to_dict(self) -> dict:
        return {"name": self.name, "ideal": matrix_to_json(self.ideal),
                "noise": None if self.noise is None else self.noise.to_dict(), "twirlable": self.twirlable}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "NoisyGate":
        noise = obj.get("noise")
        ideal = obj.get("ideal")
        return cls(obj["name"], matrix_from_json(ideal) if ideal is not None else STANDARD_GATES[obj["name"]],
                   None if noise is None else channel_from_spec(noise), bool(obj.get("twirlable", True)))


@dataclass(frozen=True)
class NoisyMeasurement:
    """Two-outcome POVM ``M0 = U D U^dagger``, ``M1 = U (I - D) U^dagger``.

    ``D = diag(d0, d1)``; the ideal measurement is ``U = I``, ``D = diag(1, 0)``.
    """

    U: np.ndarray = field(default_factory=lambda: I2.copy())
    D: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        u = np.array(self.U, dtype=complex)
        u.setflags(write=False)
        object.__setattr__(self, "U", u)
        if u.shape != (2, 2) or not _is_unitary(u):
            raise ValidationError("measurement U must be a 2x2 unitary")
        d = tuple(float(x) for x in self.D)
        if len(d) != 2 or not all(0.0 <= x <= 1.0 for x in d):
            raise ValidationError(f"measurement D entries must lie in [0, 1], got {self.D}")
        object.__setattr__(self, "D", d)

    @classmethod
    def from_readout(cls, U: np.ndarray | None = None, fidelities: Sequence[float] = (1.0, 1.0)) -> "NoisyMeasurement":
        """Build from assignment fidelities ``(P(0|0), P(1|1))`` in the rotated basis."""
        f0, f1 = (float(x) for x in fidelities)
        return cls(I2 if U is None else U, (f0, 1.0 - f1))

    @property
    def m0(self) -> np.ndarray:
        return self.U @ np.diag(self.D) @ self.U.conj().T

    def twirled(self) -> "NoisyMeasurement":
        """Average over conjugation by ``I`` and ``Z``: keep the diagonal of ``M0``."""
        m = np.real(np.diag(self.m0))
        return NoisyMeasurement(I2, (float(m[0]), float(m[1])))

    def conjugated(self, p: np.ndarray) -> "NoisyMeasurement":
        return NoisyMeasurement(p @ self.U, self.D)

    def to_dict(self) -> dict:
        return {"U": matrix_to_json(self.U), "D": list(self.D)}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "NoisyMeasurement":
        u = matrix_from_json(obj["U"]) if "U" in obj else I2
        if "readout" in obj:
            return cls.from_readout(u, obj["readout"])
        return cls(u, tuple(obj.get("D", (1.0, 0.0))))


@dataclass(frozen=True)
class NoisyPrep:
    """Single-qubit state produced when ``|0>`` is requested."""

    rho: np.ndarray = field(default_factory=lambda: KET0.copy())

    def __post_init__(self):
        r = np.array(self.rho, dtype=complex)
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)
        if r.shape != (2, 2) or np.max(np.abs(r - r.conj().T)) > 1e-10:
            raise ValidationError("prep rho must be a Hermitian 2x2 matrix")
        if abs(np.trace(r) - 1) > 1e-10 or np.linalg.eigvalsh(r).min() < -1e-10:
            raise ValidationError("prep rho must be positive with unit trace")

    @classmethod
    def rotated(cls, u: np.ndarray) -> "NoisyPrep":
        return cls(u @ KET0 @ u.conj().T)

    def twirled(self) -> "NoisyPrep":
        return NoisyPrep(np.diag(np.real(np.diag(self.rho))).astype(complex))

    def to_dict(self) -> dict:
        return {"rho": matrix_to_json(self.rho)}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "NoisyPrep":
        return cls(matrix_from_json(obj["rho"]))


# --------------------------------------------------------------------------- circuit elements


@dataclass(frozen=True)
class Prep:
    qubit: int
    prep: NoisyPrep | None = None
    twirl: bool = False


@dataclass(frozen=True)
class Gate:
    qubits: tuple[int, ...]
    gate: NoisyGate
    twirl: bool = False


@dataclass(frozen=True)
class ChannelInsert:
    qubit: int
    channel: KrausChannel


@dataclass(frozen=True)
class MeasureReset:
    """Measure ``qubit``, add the outcome to the parity record and reset it to ``|0>``."""

    qubit: int
    basis: str = "Z"
    meas: NoisyMeasurement | None = None
    twirl: bool = False


@dataclass(frozen=True)
class FinalMeasure:
    qubits: tuple[int, ...]
    basis: str = "Z"
    meas: NoisyMeasurement | None = None
    twirl: bool = False


Element = Union[Prep, Gate, ChannelInsert, MeasureReset, FinalMeasure]

_BASIS_CHANGE = {"Z": None, "X": H_GATE, "Y": H_GATE @ S_GATE.conj().T}


def _element_qubits(e: Element) -> tuple[int, ...]:
    if isinstance(e, (Gate, FinalMeasure)):
        return tuple(e.qubits)
    return (e.qubit,)


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    elements: tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.n_qubits < 1:
            raise ValidationError("circuit needs at least one qubit")
        for i, e in enumerate(self.elements):
            qs = _element_qubits(e)
            if any(not 0 <= q < self.n_qubits for q in qs) or len(set(qs)) != len(qs):
                raise ValidationError(f"element {i}: qubits {qs} invalid for a {self.n_qubits}-qubit circuit")
            if isinstance(e, Gate) and len(qs) != e.gate.n_qubits:
                raise ValidationError(f"element {i}: gate {e.gate.name} acts on {e.gate.n_qubits} qubits, got {qs}")
            if isinstance(e, ChannelInsert) and e.channel.dim != 2:
                raise ValidationError(f"element {i}: channel inserts must be single-qubit")
            if isinstance(e, (MeasureReset, FinalMeasure)) and e.basis not in _BASIS_CHANGE:
                raise ValidationError(f"element {i}: unknown measurement basis {e.basis!r}")

    def count(self, kind: type) -> int:
        return sum(isinstance(e, kind) for e in self.elements)

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "elements": [_element_to_dict(e) for e in self.elements]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "CircuitSpec":
        return cls(int(obj["n_qubits"]), tuple(_element_from_dict(e) for e in obj["elements"]))

    @classmethod
    def from_json(cls, text: str) -> "CircuitSpec":
        return cls.from_dict(json.loads(text))


def _element_to_dict(e: Element) -> dict:
    if isinstance(e, Prep):
        return {"kind": "prep", "qubit": e.qubit, "prep": None if e.prep is None else e.prep.to_dict(), "twirl": e.twirl}
    if isinstance(e, Gate):
        return {"kind": "gate", "qubits": list(e.qubits), "gate": e.gate.to_dict(), "twirl": e.twirl}
    if isinstance(e, ChannelInsert):
        return {"kind": "channel", "qubit": e.qubit, "channel": e.channel.to_dict()}
    meas = None if e.meas is None else e.meas.to_dict()
    if isinstance(e, MeasureReset):
        return {"kind": "measure_reset", "qubit": e.qubit, "basis": e.basis, "meas": meas, "twirl": e.twirl}
    return {"kind": "final_measure", "qubits": list(e.qubits), "basis": e.basis, "meas": meas, "twirl": e.twirl}


def _element_from_dict(obj: Mapping[str, Any]) -> Element:
    kind = obj.get("kind")
    meas = obj.get("meas")
    meas = None if meas is None else NoisyMeasurement.from_dict(meas)
    if kind == "prep":
        p = obj.get("prep")
        return Prep(int(obj["qubit"]), None if p is None else NoisyPrep.from_dict(p), bool(obj.get("twirl", False)))
    if kind == "gate":
        return Gate(tuple(obj["qubits"]), NoisyGate.from_dict(obj["gate"]), bool(obj.get("twirl", False)))
    if kind == "channel":
        return ChannelInsert(int(obj["qubit"]), channel_from_spec(obj["channel"]))
    if kind == "measure_reset":
        return MeasureReset(int(obj["qubit"]), obj.get("basis", "Z"), meas, bool(obj.get("twirl", False)))
    if kind == "final_measure":
        return FinalMeasure(tuple(obj["qubits"]), obj.get("basis", "Z"), meas, bool(obj.get("twirl", False)))
    raise ValidationError(f"unknown circuit element kind {kind!r}")


# --------------------------------------------------------------------------- simulation kernels


def _pov(meas: NoisyMeasurement | None, basis: str) -> tuple[np.ndarray, np.ndarray]:
    m0 = KET0 if meas is None else meas.m0
    v = _BASIS_CHANGE[basis]
    if v is not None:
        m0 = v.conj().T @ m0 @ v
    return m0, np.eye(2) - m0


def _reduce(rho: np.ndarray, q: int, k: int, m: np.ndarray) -> np.ndarray:
    """``tr_q[(M_q (x) I) rho]`` as a tensor with qubit ``q`` removed."""
    t = rho.reshape((2,) * (2 * k))
    return np.tensordot(t, m.T, axes=([q, k + q], [0, 1]))


def _embed(reduced: np.ndarray, q: int, k: int, sigma: np.ndarray) -> np.ndarray:
    out = np.multiply.outer(reduced, sigma)
    out = np.moveaxis(out, [2 * k - 2, 2 * k - 1], [q, k + q])
    return out.reshape(2 ** k, 2 ** k)


def replace_qubit(rho: np.ndarray, q: int, k: int, sigma: np.ndarray) -> np.ndarray:
    return _embed(_reduce(rho, q, k, I2), q, k, sigma)


def measure_and_reset(rho: np.ndarray, q: int, k: int, m0: np.ndarray, m1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return _embed(_reduce(rho, q, k, m0), q, k, KET0), _embed(_reduce(rho, q, k, m1), q, k, KET0)


def _apply_gate(rho: np.ndarray, e: Gate, k: int) -> np.ndarray:
    rho = apply_operator(e.gate.ideal, rho, e.qubits, k)
    if e.gate.noise is not None:
        rho = apply_channel(e.gate.noise, rho, e.qubits, k, 2)
    return rho


def _apply_linear(rho: np.ndarray, e: Element, k: int) -> np.ndarray:
    if isinstance(e, Gate):
        return _apply_gate(rho, e, k)
    if isinstance(e, ChannelInsert):
        return apply_channel(e.channel, rho, e.qubit, k, 2)
    if isinstance(e, Prep):
        return replace_qubit(rho, e.qubit, k, KET0 if e.prep is None else e.prep.rho)
    raise TypeError(type(e).__name__)


def _initial(k: int) -> np.ndarray:
    if k > MAX_LIVE_QUBITS:
        raise SizeLimitError(f"circuit has {k} qubits; dense simulation is capped at {MAX_LIVE_QUBITS}")
    rho = np.zeros((2 ** k, 2 ** k), dtype=complex)
    rho[0, 0] = 1.0
    return rho


@dataclass
class ParityState:
    """Unnormalized states conditioned on even / odd accumulated measurement parity."""

    rho_even: np.ndarray
    rho_odd: np.ndarray
    k: int

    @classmethod
    def start(cls, k: int) -> "ParityState":
        rho = _initial(k)
        return cls(rho, np.zeros_like(rho), k)

    def total_trace(self) -> float:
        return float(np.trace(self.rho_even).real + np.trace(self.rho_odd).real)

    def apply(self, e: Element) -> None:
        if isinstance(e, (MeasureReset, FinalMeasure)):
            for q in _element_qubits(e):
                m0, m1 = _pov(e.meas, e.basis)
                e0, e1 = measure_and_reset(self.rho_even, q, self.k, m0, m1)
                o0, o1 = measure_and_reset(self.rho_odd, q, self.k, m0, m1)
                self.rho_even, self.rho_odd = e0 + o1, e1 + o0
        else:
            self.rho_even = _apply_linear(self.rho_even, e, self.k)
            self.rho_odd = _apply_linear(self.rho_odd, e, self.k)
        if abs(self.total_trace() - 1) > 1e-10:
            raise SimulationError(f"trace drifted to {self.total_trace():.12f} after {type(e).__name__}")


def simulate_parity_acceptance(circuit: CircuitSpec) -> float:
    """Probability that the parity of all measurement outcomes is even."""
    state = ParityState.start(circuit.n_qubits)
    for e in circuit.elements:
        state.apply(e)
    p = float(np.trace(state.rho_even).real)
    return min(max(p, 0.0), 1.0)


def simulate_density(circuit: CircuitSpec) -> np.ndarray:
    """Final density matrix of a circuit without measurements."""
    if any(isinstance(e, (MeasureReset, FinalMeasure)) for e in circuit.elements):
        raise ValidationError("simulate_density does not accept measurements; use simulate_distribution")
    rho = _initial(circuit.n_qubits)
    for e in circuit.elements:
        rho = _apply_linear(rho, e, circuit.n_qubits)
    return rho


def simulate_distribution(circuit: CircuitSpec, max_outcomes: int = 4096) -> dict[str, float]:
    """Probability of every measurement record, keyed by the outcome bit string in time order."""
    branches = {"": _initial(circuit.n_qubits)}
    k = circuit.n_qubits
    for e in circuit.elements:
        if isinstance(e, (MeasureReset, FinalMeasure)):
            for q in _element_qubits(e):
                m0, m1 = _pov(e.meas, e.basis)
                nxt = {}
                for key, rho in branches.items():
                    r0, r1 = measure_and_reset(rho, q, k, m0, m1)
                    nxt[key + "0"], nxt[key + "1"] = r0, r1
                branches = nxt
                if len(branches) > max_outcomes:
                    raise SizeLimitError(f"more than {max_outcomes} measurement records")
        else:
            branches = {key: _apply_linear(rho, e, k) for key, rho in branches.items()}
    return {key: max(float(np.trace(rho).real), 0.0) for key, rho in sorted(branches.items())}


# --------------------------------------------------------------------------- twirling


def _twirl_targets(circuit: CircuitSpec, locations: Sequence[int] | None) -> set[int]:
    if locations is None:
        return {i for i, e in enumerate(circuit.elements) if getattr(e, "twirl", False)}
    locs = set(int(i) for i in locations)
    bad = [i for i in locs if not 0 <= i < len(circuit.elements) or isinstance(circuit.elements[i], ChannelInsert)]
    if bad:
        raise ValidationError(f"locations {sorted(bad)} cannot be twirled")
    return locs


def _check_twirlable(circuit: CircuitSpec, targets: set[int]) -> None:
    for i in targets:
        e = circuit.elements[i]
        if isinstance(e, Gate):
            if not e.gate.twirlable:
                raise ValidationError(f"element {i}: gate {e.gate.name} is marked untwirlable")
            if not is_clifford(e.gate.ideal):
                raise ValidationError(f"element {i}: gate {e.gate.name} is not Clifford; twirling is unsupported")


def exact_twirl_element(e: Element) -> Element:
    if isinstance(e, Gate):
        noise = None if e.gate.noise is None else pauli_twirl(e.gate.noise)
        return Gate(e.qubits, replace(e.gate, noise=noise), e.twirl)
    if isinstance(e, Prep):
        return e if e.prep is None else Prep(e.qubit, e.prep.twirled(), e.twirl)
    if isinstance(e, (MeasureReset, FinalMeasure)):
        # the I/Z conjugation acts on the physical readout, after any ideal basis change
        return e if e.meas is None else replace(e, meas=e.meas.twirled())
    return e


def frame_channel(noise: KrausChannel, pauli: np.ndarray) -> KrausChannel:
    """Effective noise when the gate is sandwiched by a Pauli frame: ``P D(P . P) P``."""
    return KrausChannel([pauli @ a @ pauli for a in noise.kraus], validate=False)


def _pauli_gate(label: str) -> NoisyGate:
    return NoisyGate("P:" + label, pauli_string(label), None, twirlable=False)


def sample_frame(circuit: CircuitSpec, rng: np.random.Generator, locations: Sequence[int] | None = None) -> CircuitSpec:
    """One randomly compiled instance: each twirled gate ``G`` becomes ``Q, G, P`` with ``Q = G^dag P G``;
    twirled preparations get a random ``Z`` after, twirled measurements a random ``Z`` before."""
    targets = _twirl_targets(circuit, locations)
    _check_twirlable(circuit, targets)
    out: list[Element] = []
    for i, e in enumerate(circuit.elements):
        if i not in targets:
            out.append(e)
            continue
        if isinstance(e, Gate):
            m = e.gate.n_qubits
            label = "".join(rng.choice(list("IXYZ"), size=m))
            p = pauli_string(label)
            q = e.gate.ideal.conj().T @ p @ e.gate.ideal
            out += [Gate(e.qubits, NoisyGate("Q", q, None, twirlable=False)),
                    replace(e, twirl=False),
                    Gate(e.qubits, _pauli_gate(label))]
        elif isinstance(e, Prep):
            out.append(replace(e, twirl=False))
            if rng.random() < 0.5:
                out.append(Gate((e.qubit,), _pauli_gate("Z")))
        elif isinstance(e, (MeasureReset, FinalMeasure)):
            qs = _element_qubits(e)
            flips = [q for q in qs if rng.random() < 0.5]
            v = _BASIS_CHANGE[e.basis]
            for q in flips:
                # the physical Z sits just before the computational-basis readout
                z_log = Z if v is None else v.conj().T @ Z @ v
                out.append(Gate((q,), NoisyGate("Zframe", z_log, None, twirlable=False)))
            out.append(replace(e, twirl=False))
        else:
            out.append(e)
    return CircuitSpec(circuit.n_qubits, tuple(out))


def compile_with_twirl(circuit: CircuitSpec, mode: str = "exact", frames: int = 1, seed: int = 0,
                       locations: Sequence[int] | None = None, protocol: str = "twirl"):
    """Exact mode returns one circuit with every twirled element's noise replaced by its
    twirl; sampled mode returns ``frames`` randomly compiled circuits."""
    targets = _twirl_targets(circuit, locations)
    _check_twirlable(circuit, targets)
    if mode == "exact":
        els = tuple(exact_twirl_element(e) if i in targets else e for i, e in enumerate(circuit.elements))
        return CircuitSpec(circuit.n_qubits, els)
    if mode == "sampled":
        return [sample_frame(circuit, derive_rng(seed, protocol, 0, 0, f), sorted(targets)) for f in range(frames)]
    raise ValidationError(f"twirl mode must be 'exact' or 'sampled', got {mode!r}")


# --------------------------------------------------------------------------- GHZ circuits


@dataclass(frozen=True)
class NoiseModel:
    """Noise bindings for the encoding / decoding parts of a GHZ circuit.

    ``gates`` maps standard gate names (H, S, CNOT, ...) to noise channels; Pauli
    gates are always noiseless. ``twirl`` marks all encoding gates, preparations
    and measurements for randomized compiling.
    """

    gates: Mapping[str, KrausChannel] = field(default_factory=dict)
    prep: NoisyPrep | None = None
    meas: NoisyMeasurement | None = None
    twirl: bool = True
    twirl_measurement: bool = True

    def gate(self, name: str) -> NoisyGate:
        return NoisyGate.standard(name, self.gates.get(name))


_ENCODE = {("X", "standard"): ["H"], ("Y", "standard"): ["H", "S"], ("Y", "alt"): ["S", "H", "S"], ("Z", "standard"): []}
_DECODE = {("X", "standard"): [], ("Y", "standard"): [], ("Y", "alt"): ["H"], ("Z", "standard"): ["H"]}


def _conv(b: GhzBasis) -> tuple[str, str]:
    return (b.label, b.y_convention if b.label == "Y" else "standard")


Probe = Union[KrausChannel, Sequence[tuple[NoisyGate, bool]], None]


def _probe_elements(q: int, probe: Probe, qubit_index: int) -> list[Element]:
    if probe is None:
        return []
    if isinstance(probe, KrausChannel):
        return [ChannelInsert(q, probe)]
    if isinstance(probe, (list, tuple)) and probe and isinstance(probe[0], KrausChannel):
        return [ChannelInsert(q, probe[qubit_index])]
    return [Gate((q,), g, tw) for g, tw in probe]


def build_ghz_circuit(n: int, basis: GhzBasis | str, layout: str = "full", noise: NoiseModel | None = None,
                      probe: Probe = None) -> CircuitSpec:
    """GHZ parity circuit for ``n`` logical qubits.

    ``probe`` is what each logical qubit experiences between encoding and decoding:
    a channel (or per-qubit list of channels), or a list of ``(gate, twirl)`` pairs.
    ``layout="full"`` uses ``n`` qubits; ``"two_qubit"`` reuses a second qubit with
    ``n - 1`` measure/reset cycles.
    """
    if n < 2:
        raise ValidationError(f"n must be >= 2, got {n}")
    if layout not in ("full", "two_qubit"):
        raise ValidationError(f"layout must be 'full' or 'two_qubit', got {layout!r}")
    b = as_basis(basis)
    nm = noise or NoiseModel(twirl=False)
    enc, dec = _ENCODE[_conv(b)], _DECODE[_conv(b)]
    tw, twm = nm.twirl, nm.twirl and nm.twirl_measurement

    def local(q: int, idx: int) -> list[Element]:
        els: list[Element] = [Gate((q,), nm.gate(g), tw) for g in enc]
        els += _probe_elements(q, probe, idx)
        els += [Gate((q,), nm.gate(g), tw) for g in dec]
        return els

    els: list[Element]
    if layout == "full":
        els = [Prep(q, nm.prep, tw) for q in range(n)]
        els.append(Gate((0,), nm.gate("H"), tw))
        els += [Gate((0, q), nm.gate("CNOT"), tw) for q in range(1, n)]
        for q in range(n):
            els += local(q, q)
        els.append(FinalMeasure(tuple(range(n)), "Z", nm.meas, twm))
        return CircuitSpec(n, tuple(els))
    els = [Prep(0, nm.prep, tw), Gate((0,), nm.gate("H"), tw)]
    for i in range(1, n):
        els.append(Prep(1, nm.prep, tw))
        els.append(Gate((0, 1), nm.gate("CNOT"), tw))
        els += local(1, i)
        els.append(MeasureReset(1, "Z", nm.meas, twm))
    els += local(0, 0)
    els.append(FinalMeasure((0,), "Z", nm.meas, twm))
    return CircuitSpec(2, tuple(els))


# --------------------------------------------------------------------------- protocols


@dataclass(frozen=True)
class CircuitProtocolConfig:
    n_values: tuple[int, ...]
    bases: tuple[str, ...] = ("X", "Y", "Z")
    noise: NoiseModel = field(default_factory=NoiseModel)
    layout: str = "two_qubit"
    twirl_mode: str = "exact"
    frames: int = 16
    shots: int = 0
    seed: int = 0
    y_convention: str = "standard"

    def __post_init__(self):
        if self.twirl_mode not in ("exact", "sampled", "off"):
            raise ValidationError(f"twirl mode must be exact, sampled or off, got {self.twirl_mode!r}")
        if any(n < 2 for n in self.n_values):
            raise ValidationError("n_values must be >= 2")


def acceptance(circuit: CircuitSpec, twirl_mode: str, frames: int = 16, seed: int = 0,
               stream: tuple = ("circuit", 0, 0)) -> float:
    if twirl_mode == "off":
        return simulate_parity_acceptance(replace_twirl(circuit, False))
    if twirl_mode == "exact":
        return simulate_parity_acceptance(compile_with_twirl(circuit, "exact"))
    protocol, basis, n = stream
    vals = [simulate_parity_acceptance(sample_frame(circuit, derive_rng(seed, protocol + "-frame", basis, n, f)))
            for f in range(frames)]
    return float(np.mean(vals))


def replace_twirl(circuit: CircuitSpec, flag: bool) -> CircuitSpec:
    els = tuple(replace(e, twirl=flag) if hasattr(e, "twirl") else e for e in circuit.elements)
    return CircuitSpec(circuit.n_qubits, els)


def _run(protocol: str, cfg: CircuitProtocolConfig, probe: Probe, bases: Sequence[str], jobs: int) -> list[GhzResultRow]:
    tasks = [(b, n) for b in bases for n in cfg.n_values]

    def one(task):
        label, n = task
        circ = build_ghz_circuit(n, GhzBasis(label, cfg.y_convention), cfg.layout, cfg.noise, probe)
        acc = acceptance(circ, cfg.twirl_mode, cfg.frames, cfg.seed, (protocol, label, n))
        return make_row(label, n, 1.0 - acc, cfg.shots, lambda: derive_rng(cfg.seed, protocol, label, n))

    return ordered_map(one, tasks, jobs)


def run_gate_protocol(F: NoisyGate, cfg: CircuitProtocolConfig, jobs: int = 1) -> list[GhzResultRow]:
    """Encode a GHZ state, apply ``F^dagger`` (twirled, noiseless) then ``F`` (untwirled, noisy), decode."""
    if F.n_qubits != 1:
        raise ValidationError("gate protocol supports single-qubit gates only")
    if not is_clifford(F.ideal):
        raise ValidationError(f"gate {F.name} is not Clifford")
    fdag = NoisyGate(F.name + "^dag", F.ideal.conj().T, cfg.noise.gates.get(F.name + "^dag"))
    probe = [(fdag, cfg.noise.twirl), (replace(F, twirlable=False), False)]
    return _run("gate", cfg, probe, cfg.bases, jobs)


def run_measurement_protocol(meas: NoisyMeasurement, cfg: CircuitProtocolConfig, jobs: int = 1) -> list[GhzResultRow]:
    """X and Y GHZ states read out directly with the (untwirled) noisy measurement."""
    nm = replace(cfg.noise, meas=meas, twirl_measurement=False)
    cfg = replace(cfg, noise=nm)
    bases = [b for b in cfg.bases if b in ("X", "Y")] or ["X", "Y"]
    return _run("measurement", cfg, None, bases, jobs)


def run_circuit_channel_protocol(channel: KrausChannel, cfg: CircuitProtocolConfig, jobs: int = 1) -> list[GhzResultRow]:
    """Channel protocol executed on the explicit circuit (noisy encoding, optional twirl)."""
    return _run("circuit-channel", cfg, channel, cfg.bases, jobs)
