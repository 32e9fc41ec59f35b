"""Counter-based random streams and the path-parallel worker pool.

Every path owns Philox streams keyed by (seed, path_index): one for Gaussian
blocks, one for jump counts and one for the initial law. Each stream is read
in step order, so the k'th increment of path i depends on (seed, i, k) only.
It does not change with the horizon or with how paths are split between workers.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar
import logging

import numpy as np

from config.settings import THREADS, PATH_CHUNK

logger = logging.getLogger(__name__)

T = TypeVar("T")

_MASK64 = (1 << 64) - 1


def _key(seed: int, path_index: int) -> int:
    return ((int(seed) & _MASK64) << 64) | (int(path_index) & _MASK64)


def path_stream(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_key(seed, path_index)))


def initial_stream(seed: int, path_index: int) -> np.random.Generator:
    """Stream for initial-law draws, 2^128 draws away from the increment stream of the same path."""
    return np.random.Generator(np.random.Philox(key=_key(seed, path_index)).jumped())


def jump_stream(seed: int, path_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=_key(seed, path_index)).jumped(2))


def stream_id(seed: int, path_index: int) -> str:
    return f"philox:{int(seed) & _MASK64}:{int(path_index)}"


def chunk_ranges(n_paths: int, chunk: int = PATH_CHUNK) -> list[range]:
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1.")
    chunk = max(1, int(chunk))
    return [range(start, min(start + chunk, n_paths)) for start in range(0, n_paths, chunk)]


def run_chunked(work: Callable[[range], T], n_paths: int, threads: int | None = None,
                chunk: int = PATH_CHUNK) -> list[T]:
    """Runs `work` over fixed path chunks and returns results in chunk order."""
    ranges = chunk_ranges(n_paths, chunk)
    workers = min(threads or THREADS, len(ranges))
    if workers <= 1:
        return [work(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, ranges))


def stack_chunks(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(list(parts), axis=0)
