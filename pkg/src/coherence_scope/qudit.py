"""GHZ-like experiments for prime-dimensional qudits.

For a pair ``(P, Q)`` of Heisenberg-Weyl operators generating the whole group,
``psi_{n,P,Q} = sum_s (Q^s e0)^{(x) n} / sqrt(d)`` where ``e0`` is the eigenvalue-1
eigenvector of ``P`` (the first eigenvector by eigenphase in ``[0, 2 pi)`` when 1 is
not an eigenvalue). It is stabilized by ``P_j P_{j+1}^dagger`` and ``Q^{(x) n}``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from math import comb
from typing import Sequence

import numpy as np

from .channels import CoherenceParams, KrausChannel, apply_channel, heisenberg_weyl
from .exceptions import SimulationError, SizeLimitError, ValidationError
from .ghz import _finish
from .sampling import binomial_stderr, derive_rng, ordered_map, sample_shots

BRUTEFORCE_MAX_DIM = 1024


def is_prime(d: int) -> bool:
    return d >= 2 and all(d % k for k in range(2, int(d ** 0.5) + 1))


@dataclass(frozen=True)
class HWLabel:
    d: int
    a: int
    b: int

    def __post_init__(self):
        if not is_prime(self.d):
            raise ValidationError(f"qudit dimension must be prime, got {self.d}")
        if not (0 <= self.a < self.d and 0 <= self.b < self.d):
            raise ValidationError(f"exponents must lie in [0, {self.d}), got ({self.a}, {self.b})")

    @property
    def is_identity(self) -> bool:
        return self.a == 0 and self.b == 0

    def matrix(self) -> np.ndarray:
        return heisenberg_weyl(self.d, self.a, self.b)

    def power(self, s: int) -> tuple[int, int]:
        """Label of ``P^s`` up to phase."""
        return (s * self.a) % self.d, (s * self.b) % self.d

    def __str__(self) -> str:
        return f"X^{self.a}Z^{self.b}"


@dataclass(frozen=True)
class QuditPair:
    P: HWLabel
    Q: HWLabel

    def __post_init__(self):
        if self.P.d != self.Q.d:
            raise ValidationError("P and Q must have the same dimension")
        if (self.P.a * self.Q.b - self.Q.a * self.P.b) % self.P.d == 0:
            raise ValidationError(f"{self.P} and {self.Q} commute and do not generate the group")

    @property
    def d(self) -> int:
        return self.P.d

    @classmethod
    def of(cls, d: int, p: tuple[int, int], q: tuple[int, int]) -> "QuditPair":
        return cls(HWLabel(d, *p), HWLabel(d, *q))


def sensitive_pair_set(d: int) -> list[QuditPair]:
    """``P`` in ``{X, Z, XZ, X^2 Z, ..., X^(d-1) Z}``, with ``Q = Z`` for ``P = X`` and ``Q = X`` otherwise."""
    if not is_prime(d):
        raise ValidationError(f"qudit dimension must be prime, got {d}")
    ps = [(1, 0), (0, 1)] + [(a, 1) for a in range(1, d)]
    return [QuditPair.of(d, p, (0, 1) if p == (1, 0) else (1, 0)) for p in ps]


def _reference_vector(p: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(p)
    phases = np.mod(np.angle(vals), 2 * np.pi)
    phases[np.isclose(phases, 2 * np.pi, atol=1e-12)] = 0.0
    v = vecs[:, int(np.argmin(phases))]
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v) - 1e-9 * np.arange(v.size)))
    return v * (abs(v[k]) / v[k])


def qudit_branch_vectors(pair: QuditPair) -> np.ndarray:
    """Rows ``f_s = Q^s e0``, the single-qudit factors of the state's branches."""
    q = pair.Q.matrix()
    e0 = _reference_vector(pair.P.matrix())
    out = [e0]
    for _ in range(pair.d - 1):
        out.append(q @ out[-1])
    f = np.array(out)
    _verify_branches(pair, f)
    return f


def _verify_branches(pair: QuditPair, f: np.ndarray, atol: float = 1e-10) -> None:
    p, q = pair.P.matrix(), pair.Q.matrix()
    gram = f.conj() @ f.T
    if np.max(np.abs(gram - np.eye(pair.d))) > atol:
        raise SimulationError(f"branch vectors for {pair.P},{pair.Q} are not orthonormal")
    for s, fs in enumerate(f):
        lam = fs.conj() @ p @ fs
        if np.linalg.norm(p @ fs - lam * fs) > atol:
            raise SimulationError(f"branch {s} is not an eigenvector of {pair.P}")
    if np.linalg.norm(q @ f[-1] - f[0]) > atol:
        raise SimulationError(f"{pair.Q}^d does not close the orbit of e0 (phase-convention error)")


def qudit_state(n: int, pair: QuditPair) -> np.ndarray:
    """Dense ``psi_{n,P,Q}``, checked against its stabilizers."""
    d = pair.d
    if d ** n > BRUTEFORCE_MAX_DIM:
        raise SizeLimitError(f"d**n = {d ** n} exceeds the cap {BRUTEFORCE_MAX_DIM}")
    f = qudit_branch_vectors(pair)
    psi = sum(reduce(np.kron, [fs] * n) for fs in f) / np.sqrt(d)
    p, q = pair.P.matrix(), pair.Q.matrix()
    eye = np.eye(d)
    stabs = [reduce(np.kron, [q] * n)]
    for j in range(n - 1):
        ops = [eye] * n
        ops[j], ops[j + 1] = p, p.conj().T
        stabs.append(reduce(np.kron, ops))
    for g in stabs:
        if abs(psi.conj() @ g @ psi - 1) > 1e-10:
            raise SimulationError("qudit state fails its stabilizer check")
    return psi


def _check(channels: Sequence[KrausChannel], d: int) -> None:
    if len(channels) < 2:
        raise ValidationError(f"need at least 2 qudits, got {len(channels)}")
    for j, ch in enumerate(channels):
        if ch.dim != d:
            raise ValidationError(f"channel {j} has dimension {ch.dim}, expected {d}")


def _outputs(ch: KrausChannel, f: np.ndarray) -> np.ndarray:
    d = f.shape[0]
    out = np.empty((d, d, d, d), dtype=complex)
    for s, t in itertools.product(range(d), repeat=2):
        out[s, t] = ch(np.outer(f[s], f[t].conj()))
    return out


def qudit_accept_probability(channels: Sequence[KrausChannel], pair: QuditPair) -> float:
    """Probability that the Q-basis outcomes sum to 0 mod d."""
    d = pair.d
    _check(channels, d)
    f = qudit_branch_vectors(pair)
    q = pair.Q.matrix()
    qpows = np.array([np.linalg.matrix_power(q, u) for u in range(d)])
    prod = np.ones((d, d, d), dtype=complex)
    for ch in channels:
        prod *= np.einsum("uij,stji->stu", qpows, _outputs(ch, f))
    return _finish(prod.sum() / d ** 2, "qudit acceptance probability")


def qudit_state_fidelity(channels: Sequence[KrausChannel], pair: QuditPair) -> float:
    d = pair.d
    _check(channels, d)
    f = qudit_branch_vectors(pair)
    prod = np.ones((d,) * 4, dtype=complex)
    for ch in channels:
        prod *= np.einsum("ci,stij,ej->stce", f.conj(), _outputs(ch, f), f)
    return _finish(prod.sum() / d ** 2, "qudit state fidelity")


def _dense(channels: Sequence[KrausChannel], pair: QuditPair) -> tuple[np.ndarray, np.ndarray]:
    d, n = pair.d, len(channels)
    _check(channels, d)
    psi = qudit_state(n, pair)
    rho = np.outer(psi, psi.conj())
    for j, ch in enumerate(channels):
        rho = apply_channel(ch, rho, j, n, d)
    return psi, rho


def qudit_accept_bruteforce(channels: Sequence[KrausChannel], pair: QuditPair) -> float:
    d, n = pair.d, len(channels)
    _, rho = _dense(channels, pair)
    q = pair.Q.matrix()
    proj = sum(reduce(np.kron, [np.linalg.matrix_power(q, s)] * n) for s in range(d)) / d
    return _finish(np.trace(proj @ rho), "qudit acceptance probability")


def qudit_state_fidelity_bruteforce(channels: Sequence[KrausChannel], pair: QuditPair) -> float:
    psi, rho = _dense(channels, pair)
    return _finish(psi.conj() @ rho @ psi, "qudit state fidelity")


def predicted_qudit_infidelity(params: CoherenceParams, pair: QuditPair, n: int) -> float:
    """``2 n p + n theta^2 + 2 C(n,2) theta^2 v_P`` with ``v_P = sum_s |h_{P^s}|^2``."""
    vp = params.v_squared((pair.P.a, pair.P.b))
    th2 = params.theta ** 2
    return 2 * n * params.p + n * th2 + 2 * comb(n, 2) * th2 * vp


@dataclass(frozen=True)
class QuditResultRow:
    d: int
    P_a: int
    P_b: int
    Q_a: int
    Q_b: int
    n: int
    shots: int
    error_count: int | None
    p_error: float
    stderr: float


def run_qudit_protocol(channel: KrausChannel, d: int, n_values: Sequence[int], pairs: Sequence[QuditPair] | None = None,
                       shots: int = 0, seed: int = 0, jobs: int = 1) -> list[QuditResultRow]:
    pairs = list(pairs) if pairs is not None else sensitive_pair_set(d)
    if channel.dim != d:
        raise ValidationError(f"channel dimension {channel.dim} does not match d = {d}")
    tasks = [(k, pair, int(n)) for k, pair in enumerate(pairs) for n in n_values]

    def one(task):
        k, pair, n = task
        p_err = 1.0 - qudit_accept_probability([channel] * n, pair)
        base = (d, pair.P.a, pair.P.b, pair.Q.a, pair.Q.b, n)
        if shots == 0:
            return QuditResultRow(*base, 0, None, p_err, 0.0)
        count = sample_shots(p_err, shots, derive_rng(seed, "qudit-channel", k, n))
        return QuditResultRow(*base, shots, count, count / shots, binomial_stderr(count, shots))

    return ordered_map(one, tasks, jobs)
