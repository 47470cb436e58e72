"""Channel algebra: Kraus and Choi representations, canonical Kraus operators,
the polar (coherent / incoherent) split of the leading Kraus operator, twirls
and a small library of standard channels.

Conventions
-----------
* The Choi matrix is ``(I (x) C)(|phi+><phi+|)`` with ``|phi+> = sum_j |jj>/sqrt(d)``;
  the first tensor factor is the reference system, so the Choi index ``(i, m)``
  pairs input label ``i`` with output label ``m``.
* Reshaping an eigenvector of the Choi matrix back into a Kraus operator puts the
  input label on the column index: ``A[m, i] = sqrt(d * lam) * phi[i * d + m]``.
* The unitary polar factor of ``A0`` is phase fixed so that ``det(U) = 1`` and
  ``Re tr(U) >= 0``; for qubits ``U = cos(theta) I + i sin(theta) v.sigma`` with
  ``theta >= 0``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import reduce
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .exceptions import CoherenceError, ValidationError

STRUCTURAL_ATOL = 1e-10
ZERO_EIGENVALUE = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
SIGMA = (X, Y, Z)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def pauli_string(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. ``pauli_string("XZ")``."""
    return reduce(np.kron, [PAULIS[c] for c in label])


def pauli_labels(k: int) -> list[str]:
    return ["".join(p) for p in itertools.product("IXYZ", repeat=k)]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def qubit_count(dim: int) -> int:
    if not is_power_of_two(dim):
        raise ValidationError(f"dimension {dim} is not a power of 2")
    return dim.bit_length() - 1


def heisenberg_weyl(d: int, a: int, b: int) -> np.ndarray:
    """``X^a Z^b`` for a ``d``-dimensional qudit with ``X|j> = |j+1>``, ``Z|j> = w^j |j>``."""
    if d < 2:
        raise ValidationError(f"qudit dimension must be >= 2, got {d}")
    if not (0 <= a < d and 0 <= b < d):
        raise ValidationError(f"Heisenberg-Weyl exponents must lie in [0, {d}), got ({a}, {b})")
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    omega = np.exp(2j * np.pi / d)
    phase = np.diag(omega ** np.arange(d))
    return np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(phase, b)


def hw_labels(d: int, include_identity: bool = False) -> list[tuple[int, int]]:
    labels = [(a, b) for a in range(d) for b in range(d)]
    return labels if include_identity else labels[1:]


# --------------------------------------------------------------------------- types


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map ``rho -> sum_k A_k rho A_k^dagger`` on a ``dim``-dimensional system."""

    kraus: tuple[np.ndarray, ...]
    dim: int = field(init=False)

    def __init__(self, kraus: Iterable[Any], *, validate: bool = True, atol: float = STRUCTURAL_ATOL):
        ops = tuple(_frozen(k) for k in kraus)
        if not ops:
            raise ValidationError("kraus list must be nonempty")
        d = ops[0].shape[0]
        for k, a in enumerate(ops):
            if a.ndim != 2 or a.shape != (d, d):
                raise ValidationError(f"kraus operator {k} has shape {a.shape}, expected ({d}, {d})")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"kraus operator {k} has non-finite entries")
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "dim", d)
        if validate:
            gap = self.trace_preservation_gap()
            if gap > atol:
                raise ValidationError(
                    f"kraus trace-preservation violated: ||sum_k A_k^dag A_k - I|| = {gap:.3e} > {atol:.0e}"
                )

    def trace_preservation_gap(self) -> float:
        s = sum(a.conj().T @ a for a in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    def __len__(self) -> int:
        return len(self.kraus)

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(a @ rho @ a.conj().T for a in self.kraus)

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Sequential composition: apply ``self`` first, then ``other``."""
        if other.dim != self.dim:
            raise ValidationError("cannot compose channels of different dimension")
        return KrausChannel([b @ a for a in self.kraus for b in other.kraus])

    def to_dict(self) -> dict:
        return {"dim": self.dim, "kraus": [matrix_to_json(a) for a in self.kraus]}

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "KrausChannel":
        try:
            mats = [matrix_from_json(m) for m in obj["kraus"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"kraus: malformed matrix list ({exc})") from exc
        ch = cls(mats)
        if "dim" in obj and int(obj["dim"]) != ch.dim:
            raise ValidationError(f"dim: declared {obj['dim']} but matrices are {ch.dim}x{ch.dim}")
        return ch

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "KrausChannel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ChoiMatrix:
    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        d2 = self.dim * self.dim
        if m.shape != (d2, d2):
            raise ValidationError(f"Choi matrix must be {d2}x{d2}, got {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > STRUCTURAL_ATOL:
            raise ValidationError("Choi matrix is not Hermitian")
        if abs(np.trace(m) - 1) > STRUCTURAL_ATOL:
            raise ValidationError(f"Choi matrix trace is {np.trace(m).real:.12g}, expected 1")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class CoherenceParams:
    """Polar decomposition ``A0 = phase * U * D`` of a leading Kraus operator.

    For qubits ``U = cos(theta) I + i sin(theta) axis.sigma`` and
    ``D = (1 - p) I + delta w.sigma``. For any dimension ``U = exp(i theta H)`` with
    ``H = sum_P h[P] P`` over Heisenberg-Weyl labels ``P = (a, b) != (0, 0)``, and
    ``D = (1 - p) I + sum_P d_coeffs[P] P``.
    """

    dim: int
    theta: float
    p: float
    h: dict
    d_coeffs: dict
    global_phase: complex = 1.0
    axis: np.ndarray | None = None
    delta: float | None = None
    w: np.ndarray | None = None

    def hamiltonian(self) -> np.ndarray:
        return sum(c * heisenberg_weyl(self.dim, *lab) for lab, c in self.h.items())

    def unitary(self) -> np.ndarray:
        if self.axis is not None:
            return np.cos(self.theta) * I2 + 1j * np.sin(self.theta) * bloch_operator(self.axis)
        return scipy.linalg.expm(1j * self.theta * self.hamiltonian())

    def positive_part(self) -> np.ndarray:
        if self.w is not None:
            return (1 - self.p) * I2 + self.delta * bloch_operator(self.w)
        eye = np.eye(self.dim, dtype=complex)
        return (1 - self.p) * eye + sum(c * heisenberg_weyl(self.dim, *lab) for lab, c in self.d_coeffs.items())

    def v_squared(self, label: tuple[int, int]) -> float:
        """Weight of ``H`` on the cyclic subgroup generated by ``label`` (``P^s``, s=1..d-1)."""
        d = self.dim
        a, b = label
        return float(sum(abs(self.h.get(((s * a) % d, (s * b) % d), 0.0)) ** 2 for s in range(1, d)))


def bloch_operator(v: Sequence[float]) -> np.ndarray:
    return v[0] * X + v[1] * Y + v[2] * Z


# --------------------------------------------------------------------------- JSON


def matrix_to_json(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a, dtype=complex)]


def matrix_from_json(obj: Any) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ValueError(f"expected rows of [re, im] pairs, got array of shape {arr.shape}")


# --------------------------------------------------------------------------- Choi / Kraus


def choi_from_kraus(ch: KrausChannel) -> ChoiMatrix:
    d = ch.dim
    vecs = np.array([a.T.reshape(-1) for a in ch.kraus]) / np.sqrt(d)
    return ChoiMatrix(d, vecs.T @ vecs.conj())


def _fix_vector_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) - 1e-9 * np.arange(v.size)))
    return v * (abs(v[k]) / v[k])


def canonical_kraus(choi: ChoiMatrix) -> KrausChannel:
    """Kraus operators from the eigendecomposition of the Choi matrix, largest first."""
    d = choi.dim
    lam, vecs = np.linalg.eigh(choi.matrix)
    if lam.min() < -STRUCTURAL_ATOL:
        raise ValidationError(f"not completely positive: Choi eigenvalue {lam.min():.3e} < 0")
    keep = [k for k in range(lam.size) if lam[k] >= ZERO_EIGENVALUE]
    phased = {k: _fix_vector_phase(vecs[:, k]) for k in keep}
    keep.sort(key=lambda k: (-round(lam[k] / ZERO_EIGENVALUE), tuple(-phased[k].real)))
    ops = [np.sqrt(d * lam[k]) * phased[k].reshape(d, d).T for k in keep]
    return KrausChannel(ops, atol=1e-9)


def canonicalize(ch: KrausChannel) -> KrausChannel:
    return canonical_kraus(choi_from_kraus(ch))


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    return float(np.linalg.norm(choi_from_kraus(a).matrix - choi_from_kraus(b).matrix))


# --------------------------------------------------------------------------- polar split


def _phase_fixed_polar(a0: np.ndarray) -> tuple[np.ndarray, np.ndarray, complex]:
    d = a0.shape[0]
    w, s, vh = np.linalg.svd(a0)
    if s.min() < 1e-12:
        raise CoherenceError("channel too far from identity: leading Kraus operator is singular")
    u = w @ vh
    dpos = vh.conj().T @ np.diag(s) @ vh
    base = np.exp(1j * np.angle(np.linalg.det(u)) / d)
    roots = base * np.exp(2j * np.pi * np.arange(d) / d)
    traces = [np.trace(u / r).real for r in roots]
    phase = complex(roots[int(np.argmax(traces))])
    return u / phase, (dpos + dpos.conj().T) / 2, phase


def _principal_log_hamiltonian(u: np.ndarray) -> np.ndarray:
    t, zv = scipy.linalg.schur(u, output="complex")
    angles = np.angle(np.diag(t))
    if np.max(np.abs(angles)) >= np.pi / 2:
        raise CoherenceError(
            "channel too far from identity: unitary part has eigenphase beyond pi/2, "
            "principal logarithm is ambiguous"
        )
    h = zv @ np.diag(angles) @ zv.conj().T
    h = (h + h.conj().T) / 2
    return h - np.trace(h).real / u.shape[0] * np.eye(u.shape[0])


def coherence_params(a0: np.ndarray, d: int | None = None) -> CoherenceParams:
    a0 = np.asarray(a0, dtype=complex)
    d = a0.shape[0] if d is None else d
    if a0.shape != (d, d):
        raise ValidationError(f"A0 must be {d}x{d}, got {a0.shape}")
    u, dpos, phase = _phase_fixed_polar(a0)
    ham = _principal_log_hamiltonian(u)
    h_raw = {lab: np.trace(heisenberg_weyl(d, *lab).conj().T @ ham) / d for lab in hw_labels(d)}
    theta = float(np.sqrt(sum(abs(c) ** 2 for c in h_raw.values())))
    h = {lab: (c / theta if theta >= 1e-14 else 0.0) for lab, c in h_raw.items()}
    p = float(1 - np.trace(dpos).real / d)
    d_coeffs = {lab: np.trace(heisenberg_weyl(d, *lab).conj().T @ dpos) / d for lab in hw_labels(d)}
    if d != 2:
        return CoherenceParams(d, theta if theta >= 1e-14 else 0.0, p, h, d_coeffs, phase)
    sv = np.array([np.trace(s @ ham).real / 2 for s in SIGMA])
    if theta < 1e-14:
        theta, axis = 0.0, np.array([0.0, 0.0, 1.0])
    else:
        axis = sv / np.linalg.norm(sv)
        theta = float(np.linalg.norm(sv))
    dw = np.array([np.trace(s @ dpos).real / 2 for s in SIGMA])
    delta = float(np.linalg.norm(dw))
    w = dw / delta if delta >= 1e-14 else np.array([0.0, 0.0, 1.0])
    if delta < 1e-14:
        delta = 0.0
    return CoherenceParams(2, theta, p, h, d_coeffs, phase, axis=axis, delta=delta, w=w)


def leading_kraus(ch: KrausChannel) -> np.ndarray:
    """Dominant canonical Kraus operator, phase fixed so that ``A0 = U D``."""
    choi = choi_from_kraus(ch)
    lam = choi.eigenvalues()
    if lam.max() < 0.5:
        raise CoherenceError(f"no dominant Kraus operator: largest Choi eigenvalue {lam.max():.3f} < 0.5")
    a0 = canonical_kraus(choi).kraus[0]
    _, _, phase = _phase_fixed_polar(a0)
    return a0 / phase


# --------------------------------------------------------------------------- application


def apply_operator(op: np.ndarray, rho: np.ndarray, targets: Sequence[int], k: int, d: int = 2,
                   side: str = "both") -> np.ndarray:
    """Apply ``op`` (acting on ``targets``) to a ``d**k`` density matrix from the left,
    right (as ``op^dagger``), or both."""
    m = len(targets)
    t = rho.reshape((d,) * (2 * k))
    a = op.reshape((d,) * (2 * m))
    if side in ("left", "both"):
        t = np.tensordot(a, t, axes=(list(range(m, 2 * m)), list(targets)))
        t = np.moveaxis(t, list(range(m)), list(targets))
    if side in ("right", "both"):
        cols = [k + q for q in targets]
        t = np.tensordot(t, a.conj(), axes=(cols, list(range(m, 2 * m))))
        t = np.moveaxis(t, list(range(2 * k - m, 2 * k)), cols)
    return t.reshape(d ** k, d ** k)


def apply_channel(ch: KrausChannel, rho: np.ndarray, target: int | Sequence[int] = 0, k: int = 1,
                  d: int | None = None) -> np.ndarray:
    """Apply ``ch`` to the qudit(s) ``target`` of a ``k``-qudit density matrix."""
    targets = (target,) if np.isscalar(target) else tuple(target)
    if d is None:
        d = int(round(ch.dim ** (1 / len(targets))))
    if d ** len(targets) != ch.dim:
        raise ValidationError(f"channel dimension {ch.dim} does not match {len(targets)} qudits of dim {d}")
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (d ** k, d ** k):
        raise ValidationError(f"density matrix shape {rho.shape} does not match {k} qudits of dim {d}")
    if any(not 0 <= q < k for q in targets) or len(set(targets)) != len(targets):
        raise ValidationError(f"invalid target qudits {targets} for k={k}")
    return sum(apply_operator(a, rho, targets, k, d) for a in ch.kraus)


# --------------------------------------------------------------------------- twirls


def pauli_channel_probabilities(ch: KrausChannel) -> dict[str, float]:
    k = qubit_count(ch.dim)
    norm = 4 ** k
    out = {}
    for lab in pauli_labels(k):
        p = pauli_string(lab)
        out[lab] = float(sum(abs(np.trace(p @ a)) ** 2 for a in ch.kraus) / norm)
    return out


def pauli_twirl(ch: KrausChannel, k: int | None = None) -> KrausChannel:
    """Exact average of ``P C(P . P) P`` over all ``4**k`` Paulis, as a Pauli channel."""
    kk = qubit_count(ch.dim)
    if k is not None and k != kk:
        raise ValidationError(f"channel acts on {kk} qubits, not {k}")
    probs = pauli_channel_probabilities(ch)
    items = sorted(((-p, i, lab) for i, (lab, p) in enumerate(probs.items()) if p > 1e-15))
    return KrausChannel([np.sqrt(-mp) * pauli_string(lab) for mp, _, lab in items], atol=1e-9)


def group_twirl(ch: KrausChannel, unitaries: Sequence[np.ndarray]) -> KrausChannel:
    """Uniform average of ``V^dag C(V . V^dag) V`` over ``unitaries``, canonicalized."""
    w = 1 / np.sqrt(len(unitaries))
    ops = [w * v.conj().T @ a @ v for v in unitaries for a in ch.kraus]
    return canonicalize(KrausChannel(ops, atol=1e-9))


# --------------------------------------------------------------------------- builders


def _prob(name: str, q: float) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {q}")
    return q


def _unit_axis(axis: Sequence[float]) -> np.ndarray:
    v = np.asarray(axis, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValidationError(f"axis must be a finite 3-vector, got {axis!r}")
    n = np.linalg.norm(v)
    if n == 0:
        raise ValidationError("axis must be nonzero")
    return v / n


def rotation_unitary(theta: float, axis: Sequence[float] = (0, 0, 1)) -> np.ndarray:
    v = _unit_axis(axis)
    return np.cos(theta) * I2 + 1j * np.sin(theta) * bloch_operator(v)


def identity(dim: int = 2) -> KrausChannel:
    return KrausChannel([np.eye(dim)])


def unitary(u: np.ndarray) -> KrausChannel:
    u = np.asarray(u, dtype=complex)
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > STRUCTURAL_ATOL:
        raise ValidationError("matrix is not unitary")
    return KrausChannel([u])


def rotation(theta: float, axis: Sequence[float] = (0, 0, 1)) -> KrausChannel:
    return KrausChannel([rotation_unitary(theta, axis)])


def dephasing(q: float) -> KrausChannel:
    q = _prob("q", q)
    return KrausChannel([np.sqrt(1 - q) * I2, np.sqrt(q) * Z])


def bit_flip(q: float) -> KrausChannel:
    q = _prob("q", q)
    return KrausChannel([np.sqrt(1 - q) * I2, np.sqrt(q) * X])


def depolarizing(q: float) -> KrausChannel:
    """``{sqrt(1-q) I, sqrt(q/3) X, sqrt(q/3) Y, sqrt(q/3) Z}``; ``q = 3/4`` is fully depolarizing."""
    q = _prob("q", q)
    return KrausChannel([np.sqrt(1 - q) * I2] + [np.sqrt(q / 3) * s for s in SIGMA])


def amplitude_damping(gamma: float) -> KrausChannel:
    g = _prob("gamma", gamma)
    return KrausChannel([np.array([[1, 0], [0, np.sqrt(1 - g)]]), np.array([[0, np.sqrt(g)], [0, 0]])])


def hamiltonian(theta: float, matrix: Any) -> KrausChannel:
    """Unitary channel ``exp(i theta H)`` for a Hermitian ``H`` of any dimension."""
    h = matrix if isinstance(matrix, np.ndarray) else matrix_from_json(matrix)
    if np.max(np.abs(h - h.conj().T)) > STRUCTURAL_ATOL:
        raise ValidationError("hamiltonian matrix must be Hermitian")
    return unitary(scipy.linalg.expm(1j * float(theta) * h))


def composite(channels: Sequence[KrausChannel]) -> KrausChannel:
    if not channels:
        raise ValidationError("composite needs at least one channel")
    return reduce(KrausChannel.then, channels)


def convex_mix(channels: Sequence[KrausChannel], weights: Sequence[float]) -> KrausChannel:
    w = np.asarray(weights, dtype=float)
    if len(channels) != w.size or w.size == 0:
        raise ValidationError("convex_mix needs one weight per channel")
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise ValidationError(f"weights must be nonnegative and sum to 1, got {list(w)}")
    ops = [np.sqrt(wi) * a for wi, ch in zip(w, channels) if wi > 0 for a in ch.kraus]
    return KrausChannel(ops)


def _sub_channel(spec: Any) -> KrausChannel:
    return spec if isinstance(spec, KrausChannel) else channel_from_spec(spec)


BUILDERS = {
    "identity": lambda dim=2: identity(int(dim)),
    "rotation": lambda theta, axis=(0, 0, 1): rotation(float(theta), axis),
    "dephasing": lambda q: dephasing(q),
    "depolarizing": lambda q: depolarizing(q),
    "amplitude_damping": lambda gamma: amplitude_damping(gamma),
    "bit_flip": lambda q: bit_flip(q),
    "unitary": lambda matrix: unitary(matrix_from_json(matrix) if not isinstance(matrix, np.ndarray) else matrix),
    "hamiltonian": hamiltonian,
    "composite": lambda channels: composite([_sub_channel(c) for c in channels]),
    "convex_mix": lambda channels, weights: convex_mix([_sub_channel(c) for c in channels], weights),
}


def build_channel(kind: str, params: Mapping[str, Any] | None = None) -> KrausChannel:
    """Construct a named channel, e.g. ``build_channel("rotation", {"theta": 0.1, "axis": [0, 0, 1]})``."""
    try:
        builder = BUILDERS[kind]
    except KeyError:
        raise ValidationError(f"unknown channel builder {kind!r}; known: {sorted(BUILDERS)}") from None
    try:
        return builder(**dict(params or {}))
    except TypeError as exc:
        raise ValidationError(f"bad parameters for builder {kind!r}: {exc}") from exc


def channel_from_spec(spec: Mapping[str, Any]) -> KrausChannel:
    """Config form: ``{"builder": name, "params": {...}}`` or an explicit ``{"dim", "kraus"}`` object."""
    if isinstance(spec, KrausChannel):
        return spec
    if not isinstance(spec, Mapping):
        raise ValidationError(f"channel config must be an object, got {type(spec).__name__}")
    if "kraus" in spec:
        return KrausChannel.from_dict(spec)
    if "builder" in spec:
        return build_channel(spec["builder"], spec.get("params", {}))
    raise ValidationError("channel config needs either 'builder' or 'kraus'")


# --------------------------------------------------------------------------- random channels


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_channel(d: int, rng: np.random.Generator, n_kraus: int = 3) -> KrausChannel:
    """Random CPTP map from a Haar-random isometry (Stinespring dilation)."""
    v = random_unitary(d * n_kraus, rng)[:, :d]
    return KrausChannel([v[k * d:(k + 1) * d] for k in range(n_kraus)], atol=1e-9)


def random_qubit_noise(rng: np.random.Generator) -> KrausChannel:
    """Convex mixture of a rotation with Pauli and damping noise, near the identity."""
    axis = rng.normal(size=3)
    parts = [
        rotation(rng.uniform(0, 0.3), axis),
        depolarizing(rng.uniform(0, 0.3)),
        amplitude_damping(rng.uniform(0, 0.3)),
        dephasing(rng.uniform(0, 0.3)),
    ]
    w = rng.dirichlet(np.ones(len(parts)))
    return composite([convex_mix([parts[0], parts[1]], [w[0] / (w[0] + w[1]), w[1] / (w[0] + w[1])]),
                      parts[2] if rng.random() < 0.5 else parts[3]])


# --------------------------------------------------------------------------- worst case


def _bloch_affine(ch: KrausChannel) -> tuple[np.ndarray, np.ndarray]:
    t_mat = np.array([[np.trace(si @ ch(sj)).real / 2 for sj in SIGMA] for si in SIGMA])
    t_vec = np.array([np.trace(si @ ch(I2)).real / 2 for si in SIGMA])
    return t_mat, t_vec


def worst_case_infidelity(ch: KrausChannel, grid: tuple[int, int] = (64, 128), tol: float = 1e-10) -> float:
    """``1 - min_psi <psi|C(psi)|psi>`` over pure qubit states (grid search plus local refinement)."""
    if ch.dim != 2:
        raise ValidationError("worst_case_infidelity supports qubit channels only")
    t_mat, t_vec = _bloch_affine(ch)

    def fid(polar, azim):
        n = np.stack([np.sin(polar) * np.cos(azim), np.sin(polar) * np.sin(azim), np.cos(polar)])
        out = np.einsum("i...,ij,j...->...", n, t_mat, n) + np.einsum("i...,i->...", n, t_vec)
        return (1 + out) / 2

    polar = np.linspace(0, np.pi, grid[0])
    azim = np.linspace(0, 2 * np.pi, grid[1], endpoint=False)
    pp, aa = np.meshgrid(polar, azim, indexing="ij")
    vals = fid(pp, aa)
    best = float(vals.min())
    for idx in np.argsort(vals, axis=None)[:4]:
        x0 = np.array([pp.flat[idx], aa.flat[idx]])
        res = minimize(lambda x: fid(x[0], x[1]), x0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": tol * 1e-2, "maxiter": 4000})
        best = min(best, float(res.fun))
    return float(np.clip(1 - best, 0.0, 1.0))
