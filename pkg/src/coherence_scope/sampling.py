"""Seeded random streams, binomial shot sampling and a deterministic job map.

Every random draw in the package comes from a numpy ``PCG64`` generator seeded by
``SeedSequence(entropy=master_seed, spawn_key=(crc32(protocol), basis_index, n, frame))``.
Streams for different ``(protocol, basis, n, frame)`` tuples are therefore
independent of each other and of the order in which jobs are executed.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

from .exceptions import ValidationError

T = TypeVar("T")
R = TypeVar("R")

BASIS_INDEX = {"X": 0, "Y": 1, "Z": 2}


def stream_key(protocol: str, basis: str | int, n: int, frame: int = 0) -> tuple[int, int, int, int]:
    b = basis if isinstance(basis, int) else BASIS_INDEX.get(basis, zlib.crc32(str(basis).encode()))
    return (zlib.crc32(protocol.encode()), int(b), int(n), int(frame))


def derive_rng(seed: int, protocol: str, basis: str | int = 0, n: int = 0, frame: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValidationError(f"seed must be nonnegative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=stream_key(protocol, basis, n, frame))
    return np.random.Generator(np.random.PCG64(ss))


def sample_shots(p_error: float, shots: int, rng: np.random.Generator | int) -> int:
    """Number of odd-parity outcomes in ``shots`` independent runs."""
    if not 0.0 <= p_error <= 1.0:
        raise ValidationError(f"p_error must lie in [0, 1], got {p_error}")
    if shots < 0:
        raise ValidationError(f"shots must be >= 0, got {shots}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.PCG64(rng))
    return int(rng.binomial(shots, p_error))


def binomial_stderr(count: int, shots: int) -> float:
    if shots <= 0:
        return 0.0
    p = count / shots
    return float(np.sqrt(p * (1 - p) / shots))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """``[fn(x) for x in items]``, optionally on a thread pool; output order is input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
