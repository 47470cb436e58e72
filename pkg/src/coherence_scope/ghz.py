"""GHZ parity experiments on qubits with independent per-qubit noise.

The acceptance probability of an ``n``-qubit GHZ state in basis ``P`` is a sum of
four products of single-qubit traces, so it costs ``O(n)`` instead of ``4**n``.
A dense density-matrix implementation is kept as an oracle.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .channels import KrausChannel, CoherenceParams, apply_channel
from .exceptions import SimulationError, SizeLimitError, ValidationError
from .sampling import binomial_stderr, derive_rng, ordered_map, sample_shots

BRUTEFORCE_MAX_QUBITS = 10
NEGATIVE_CLAMP = 1e-9

_S2 = 1 / np.sqrt(2)


@dataclass(frozen=True)
class GhzBasis:
    """Single-qubit basis ``{|0_P>, |1_P>}`` used to build ``(|0_P..0_P> + |1_P..1_P>)/sqrt(2)``.

    ``y_convention="alt"`` uses ``|1_Y> = (i|0> + |1>)/sqrt(2)`` instead of
    ``(|0> - i|1>)/sqrt(2)``; it changes which Pauli the parity is read out in.
    """

    label: str
    y_convention: str = "standard"

    def __post_init__(self):
        if self.label not in ("X", "Y", "Z"):
            raise ValidationError(f"basis must be one of X, Y, Z, got {self.label!r}")
        if self.y_convention not in ("standard", "alt"):
            raise ValidationError(f"y_convention must be 'standard' or 'alt', got {self.y_convention!r}")

    def kets(self) -> tuple[np.ndarray, np.ndarray]:
        if self.label == "Z":
            return np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
        if self.label == "X":
            return np.array([_S2, _S2], dtype=complex), np.array([_S2, -_S2], dtype=complex)
        if self.y_convention == "alt":
            return np.array([_S2, 1j * _S2]), np.array([1j * _S2, _S2])
        return np.array([_S2, 1j * _S2]), np.array([_S2, -1j * _S2])

    def flip_operator(self) -> np.ndarray:
        """``|1_P><0_P| + |0_P><1_P|``; its n-fold tensor power stabilizes the GHZ state."""
        k0, k1 = self.kets()
        return np.outer(k1, k0.conj()) + np.outer(k0, k1.conj())

    @property
    def flip_pauli(self) -> str:
        if self.label == "Z" or (self.label == "Y" and self.y_convention == "alt"):
            return "X"
        return "Z"

    @property
    def axis_index(self) -> int:
        return "XYZ".index(self.label)


def as_basis(basis: GhzBasis | str, y_convention: str = "standard") -> GhzBasis:
    return basis if isinstance(basis, GhzBasis) else GhzBasis(basis, y_convention)


def ghz_state(n: int, basis: GhzBasis | str) -> np.ndarray:
    b = as_basis(basis)
    k0, k1 = b.kets()
    return (reduce(np.kron, [k0] * n) + reduce(np.kron, [k1] * n)) * _S2


def _check_channels(channels: Sequence[KrausChannel]) -> None:
    if len(channels) < 2:
        raise ValidationError(f"need at least 2 qubits, got {len(channels)}")
    for j, ch in enumerate(channels):
        if ch.dim != 2:
            raise ValidationError(f"channel {j} has dimension {ch.dim}, expected a qubit channel")


def _finish(value: complex, what: str) -> float:
    if abs(value.imag) > 1e-9:
        raise SimulationError(f"{what} has imaginary part {value.imag:.3e}")
    v = value.real
    if v < -NEGATIVE_CLAMP or v > 1 + NEGATIVE_CLAMP:
        raise SimulationError(f"{what} = {v!r} outside [0, 1]")
    return float(min(max(v, 0.0), 1.0))


def _outputs(ch: KrausChannel, kets: Sequence[np.ndarray]) -> np.ndarray:
    """``out[a, b] = C(|a><b|)`` for the given kets, shape ``(m, m, 2, 2)``."""
    m = len(kets)
    out = np.empty((m, m, 2, 2), dtype=complex)
    for a, b in itertools.product(range(m), repeat=2):
        out[a, b] = ch(np.outer(kets[a], kets[b].conj()))
    return out


def accept_probability(channels: Sequence[KrausChannel], basis: GhzBasis | str) -> float:
    """Probability of even parity when each GHZ qubit passes through its own channel."""
    _check_channels(channels)
    b = as_basis(basis)
    kets = b.kets()
    flip = b.flip_operator()
    total = 0j
    prod_id = np.ones((2, 2), dtype=complex)
    prod_flip = np.ones((2, 2), dtype=complex)
    for ch in channels:
        out = _outputs(ch, kets)
        prod_id *= np.einsum("abii->ab", out)
        prod_flip *= np.einsum("ij,abji->ab", flip, out)
    total = (prod_id.sum() + prod_flip.sum()) / 4
    return _finish(total, "acceptance probability")


def ghz_state_fidelity(channels: Sequence[KrausChannel], basis: GhzBasis | str) -> float:
    """``<psi| (x)_j C_j(|psi><psi|) |psi>`` for the GHZ state ``psi``."""
    _check_channels(channels)
    kets = as_basis(basis).kets()
    prod = np.ones((2, 2, 2, 2), dtype=complex)
    for ch in channels:
        out = _outputs(ch, kets)
        prod *= np.einsum("ci,abij,ej->abce", np.conj(kets), out, kets)
    return _finish(prod.sum() / 4, "state fidelity")


def _dense_output(channels: Sequence[KrausChannel], basis: GhzBasis | str) -> tuple[np.ndarray, np.ndarray]:
    n = len(channels)
    if n > BRUTEFORCE_MAX_QUBITS:
        raise SizeLimitError(f"brute force limited to n <= {BRUTEFORCE_MAX_QUBITS}, got n = {n}")
    _check_channels(channels)
    psi = ghz_state(n, basis)
    rho = np.outer(psi, psi.conj())
    for j, ch in enumerate(channels):
        rho = apply_channel(ch, rho, j, n)
    return psi, rho


def accept_probability_bruteforce(channels: Sequence[KrausChannel], basis: GhzBasis | str) -> float:
    b = as_basis(basis)
    _, rho = _dense_output(channels, b)
    parity = reduce(np.kron, [b.flip_operator()] * len(channels))
    return _finish((np.trace(rho) + np.trace(parity @ rho)) / 2, "acceptance probability")


def ghz_state_fidelity_bruteforce(channels: Sequence[KrausChannel], basis: GhzBasis | str) -> float:
    psi, rho = _dense_output(channels, basis)
    return _finish(psi.conj() @ rho @ psi, "state fidelity")


# --------------------------------------------------------------------------- predictions


def _v2(params: CoherenceParams, label: str) -> float:
    return float(params.axis["XYZ".index(label)] ** 2)


def predicted_infidelity(params: CoherenceParams, basis: GhzBasis | str, n: int) -> float:
    """Leading-order ``1 - fidelity`` with the GHZ state itself."""
    b = as_basis(basis)
    v2 = _v2(params, b.label)
    th2 = params.theta ** 2
    return 2 * n * params.p + n * (1 - v2) * th2 + n * n * th2 * v2


def predicted_error_singlequbit_meas(params: CoherenceParams, basis: GhzBasis | str, n: int) -> float:
    """Leading-order odd-parity probability when each qubit is measured separately."""
    b = as_basis(basis)
    vp2 = _v2(params, b.label)
    vq2 = _v2(params, b.flip_pauli)
    th2 = params.theta ** 2
    return 2 * n * params.p + n * th2 * (1 - vp2 - vq2) + n * n * th2 * vp2


# --------------------------------------------------------------------------- experiments


@dataclass(frozen=True)
class GhzResultRow:
    basis: str
    n: int
    shots: int
    error_count: int | None
    p_error: float
    stderr: float


@dataclass(frozen=True)
class GhzExperiment:
    """One channel-protocol sweep.

    ``channels`` is either a single channel used on every qubit, or a list of
    per-qubit channels at least ``max(n_values)`` long (qubit ``j`` uses entry ``j``).
    """

    channels: KrausChannel | tuple[KrausChannel, ...]
    n_values: tuple[int, ...]
    bases: tuple[str, ...] = ("X", "Y", "Z")
    shots: int = 0
    seed: int = 0
    y_convention: str = "standard"

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_values)
        object.__setattr__(self, "n_values", ns)
        if not ns or any(n < 2 for n in ns):
            raise ValidationError(f"n_values must be nonempty integers >= 2, got {list(ns)}")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValidationError(f"n_values must be strictly increasing, got {list(ns)}")
        if self.shots < 0:
            raise ValidationError(f"shots must be >= 0, got {self.shots}")
        if not isinstance(self.channels, KrausChannel):
            chans = tuple(self.channels)
            object.__setattr__(self, "channels", chans)
            if len(chans) < ns[-1]:
                raise ValidationError(f"need {ns[-1]} per-qubit channels, got {len(chans)}")
        for b in self.bases:
            as_basis(b, self.y_convention)

    def channels_for(self, n: int) -> list[KrausChannel]:
        if isinstance(self.channels, KrausChannel):
            return [self.channels] * n
        return list(self.channels[:n])


def make_row(label: str, n: int, p_error: float, shots: int, rng_factory) -> GhzResultRow:
    if shots == 0:
        return GhzResultRow(label, n, 0, None, p_error, 0.0)
    count = sample_shots(p_error, shots, rng_factory())
    return GhzResultRow(label, n, shots, count, count / shots, binomial_stderr(count, shots))


def run_channel_protocol(exp: GhzExperiment, jobs: int = 1) -> list[GhzResultRow]:
    """Odd-parity rates for every ``(basis, n)``, in that order."""
    tasks = [(b, n) for b in exp.bases for n in exp.n_values]

    def one(task):
        label, n = task
        acc = accept_probability(exp.channels_for(n), as_basis(label, exp.y_convention))
        return make_row(label, n, 1.0 - acc, exp.shots, lambda: derive_rng(exp.seed, "channel", label, n))

    return ordered_map(one, tasks, jobs)
