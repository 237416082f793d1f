"""
Seeded random streams.

A stream is identified by (master_seed, stream_id) and backed by the
counter-based Philox bit generator, so the same pair always yields the same
sequence on every platform, and distinct stream ids are independent.
"""
import hashlib
from typing import Optional, Sequence, Tuple, Union

import numpy as np

UINT64_MAX = 2 ** 64 - 1

Shape = Optional[Union[int, Tuple[int, ...]]]


class RngStream:
    """Single-owner random stream. Do not share one instance between workers."""

    def __init__(self, master_seed: int, stream_id: int):
        for name, value in (("master_seed", master_seed), ("stream_id", stream_id)):
            if not isinstance(value, (int, np.integer)) or not 0 <= int(value) <= UINT64_MAX:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        seed_seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(seed_seq))

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"

    def random(self, size: Shape = None):
        """Uniform draw(s) in [0, 1)."""
        return self._gen.random(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Shape = None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size: Shape = None):
        """Integer draw(s) in [low, high)."""
        return self._gen.integers(low, high, size=size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Shape = None):
        return self._gen.normal(loc, scale, size)

    def standard_normal(self, size: Shape = None):
        return self._gen.standard_normal(size)

    def gamma(self, shape: float, size: Shape = None):
        return self._gen.gamma(shape, 1.0, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def bernoulli(self, p: float) -> bool:
        return bool(self._gen.random() < p)


def derive_stream(master_seed: int, stream_id: int) -> RngStream:
    """Create the stream for (master_seed, stream_id)."""
    return RngStream(master_seed, stream_id)


def stream_id_for(stage: str, *indices: int) -> int:
    """
    Map a stage name plus counters (epoch, batch, ...) to a 64-bit stream id.

    Args:
        stage: Pipeline stage name, e.g. "split" or "online-aug"
        indices: Non-negative counters that further identify the stream

    Returns:
        Stable 64-bit unsigned stream id
    """
    key = stage + "/" + "/".join(str(int(i)) for i in indices)
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stage_stream(master_seed: int, stage: str, *indices: int) -> RngStream:
    """Shorthand for derive_stream(master_seed, stream_id_for(stage, *indices))."""
    return derive_stream(master_seed, stream_id_for(stage, *indices))


def first_draws(stream: RngStream, count: int = 16) -> Sequence[float]:
    """First `count` uniform draws of a stream, as plain floats."""
    return [float(v) for v in stream.random(count)]
