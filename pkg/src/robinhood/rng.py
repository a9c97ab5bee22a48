"""Seeded, splittable random streams and a chunked trial runner.

Trials are grouped into fixed-size chunks. Chunk ``c`` of an experiment
tagged ``tag`` draws from ``SFC64(SeedSequence(seed, spawn_key=(tag, c)))``,
so results depend only on ``(seed, tag, trials, chunk_size)`` and never on
the number of worker threads. Compiled kernels read the same bit generator
through numpy's ctypes interface.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

from numpy.random import SFC64, Generator, SeedSequence

THREADS_ENV = "ROBINHOOD_THREADS"

T = TypeVar("T")

_proto = SFC64(0)
next_double = _proto.ctypes.next_double


def stream_tag(name: str) -> int:
    return zlib.crc32(name.encode())


def bit_generator(seed: int, *key: int) -> SFC64:
    return SFC64(SeedSequence(seed, spawn_key=tuple(key)))


def generator(seed: int, *key: int) -> Generator:
    """A numpy Generator on the stream ``(seed, *key)``."""
    return Generator(bit_generator(seed, *key))


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        return max(1, int(value))
    return 1


def chunk_sizes(trials: int, chunk_size: int) -> list[int]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    full, rest = divmod(trials, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def run_chunks(
    work: Callable[[int, int], T],
    trials: int,
    seed: int,
    name: str,
    chunk_size: int = 10_000,
    threads: int | None = None,
) -> list[T]:
    """Run ``work(size, state_address)`` once per chunk, results in chunk order.

    ``work`` receives the ctypes state address of the chunk's bit generator;
    compiled kernels pass it to ``next_double``. Kernels release the GIL, so
    ``threads > 1`` runs chunks concurrently.
    """
    tag = stream_tag(name)
    sizes = chunk_sizes(trials, chunk_size)
    threads = threads or default_threads()

    def one(index: int) -> T:
        bg = bit_generator(seed, tag, index)
        result = work(sizes[index], bg.ctypes.state_address)
        del bg
        return result

    if threads == 1 or len(sizes) == 1:
        return [one(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(len(sizes))))
