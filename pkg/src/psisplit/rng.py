"""Random streams and the buffered draw source shared by both backends.

Per-replica streams are derived as ``seed XOR replica`` so replicas are
independent and a run is reproducible from (seed, replica) alone.  Arrival
times use a separate stream derived from the same pair, which keeps the
jump chain identical whether or not the time overlay is enabled.
"""

from __future__ import annotations

import numpy as np

BLOCK = 1 << 16


def stream_for(seed: int, replica: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64DXSM(seed ^ replica))


def times_stream_for(seed: int, replica: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64DXSM(np.random.SeedSequence((seed ^ replica, 0x74)))
    )


class DrawBuffer:
    """Uniform(0,1) draws consumed one at a time from block refills.

    Both backends consume draws through this object in the same order, so
    trajectories agree bit for bit across backends.
    """

    __slots__ = ("rng", "block", "arr", "pos")

    def __init__(self, rng: np.random.Generator, block: int = BLOCK):
        self.rng = rng
        self.block = block
        self.arr = rng.random(block)
        self.pos = 0

    def refill(self) -> None:
        self.arr = self.rng.random(self.block)
        self.pos = 0

    def next(self) -> float:
        if self.pos >= self.arr.shape[0]:
            self.refill()
        v = self.arr[self.pos]
        self.pos += 1
        return float(v)

    def next_nonzero(self) -> float:
        v = self.next()
        while v == 0.0:
            v = self.next()
        return v


def as_draws(source) -> DrawBuffer:
    """Wrap a numpy Generator as a DrawBuffer; pass DrawBuffer through."""
    if isinstance(source, DrawBuffer):
        return source
    if isinstance(source, np.random.Generator):
        return DrawBuffer(source)
    raise TypeError(f"expected DrawBuffer or numpy Generator, got {type(source)!r}")
