"""Counter-based random streams and order-independent parallel replicates.

Every stream is a Philox generator keyed by (seed, purpose, index). Replicates
are grouped into fixed-size blocks, block b owning stream (seed, purpose, b),
so results never depend on how many workers process the blocks.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

DEFAULT_SEED = 20250117
BLOCK = 256

T = TypeVar("T")


def default_seed() -> int:
    env = os.environ.get("BRANCHKIT_SEED")
    return int(env) if env else DEFAULT_SEED


def _purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode())


def stream(seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, _purpose_code(purpose), index])
    return np.random.Generator(np.random.Philox(ss))


def map_blocks(fn: Callable[[int, np.random.Generator], T], seed: int, purpose: str,
               blocks: Iterable[int], threads: int = 1) -> list[T]:
    """Apply ``fn(block_index, rng)`` to each block; results in block order."""
    blocks = list(blocks)

    def run(b):
        return fn(b, stream(seed, purpose, b))

    if threads <= 1 or len(blocks) <= 1:
        return [run(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, blocks))


def block_sizes(n: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(n, block)
    return [block] * full + ([rest] if rest else [])
