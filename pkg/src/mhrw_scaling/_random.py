"""Reproducible random streams and deterministic chunked Monte Carlo.

Every Monte Carlo routine in the package splits its replicates into chunks of
a size that depends only on the problem (never on the number of worker
threads).  Chunk ``j`` of an experiment keyed by ``(seed, *key)`` draws from
its own Philox stream, so results are bit-identical for any ``threads``.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

# Target number of float64 cells per chunk (rows * columns).
CHUNK_CELLS = 2_000_000


def _key_int(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part)


def make_rng(seed: int, *key) -> np.random.Generator:
    """Counter-based generator for stream ``(seed, *key)``.

    ``key`` entries may be ints or short strings (hashed with crc32).
    """
    spawn_key = tuple(_key_int(k) for k in key)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(total: int, columns: int = 1, cells: int = CHUNK_CELLS) -> list[int]:
    rows = max(1, cells // max(1, columns))
    sizes = [rows] * (total // rows)
    if total % rows:
        sizes.append(total % rows)
    return sizes


def map_chunks(
    fn: Callable[[int, int], T],
    sizes: Sequence[int],
    threads: int = 1,
) -> list[T]:
    """Apply ``fn(chunk_index, chunk_size)`` over chunks, results in chunk order."""
    if threads <= 1 or len(sizes) <= 1:
        return [fn(j, s) for j, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, j, s) for j, s in enumerate(sizes)]
        return [f.result() for f in futures]


class Moments:
    """Streaming count/mean/M2 accumulator with pairwise merge (Chan et al.)."""

    __slots__ = ("count", "mean", "m2")

    def __init__(self, count: int = 0, mean: float = 0.0, m2: float = 0.0):
        self.count = count
        self.mean = mean
        self.m2 = m2

    @classmethod
    def of(cls, values: np.ndarray) -> "Moments":
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(values.size, mean, float(((values - mean) ** 2).sum()))

    def merge(self, other: "Moments") -> "Moments":
        if other.count == 0:
            return Moments(self.count, self.mean, self.m2)
        if self.count == 0:
            return Moments(other.count, other.mean, other.m2)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return Moments(n, mean, m2)

    @classmethod
    def reduce(cls, parts: Sequence["Moments"]) -> "Moments":
        out = cls()
        for p in parts:
            out = out.merge(p)
        return out

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def stderr(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count > 1 else 0.0
