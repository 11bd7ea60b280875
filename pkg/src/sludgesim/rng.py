"""Reproducible random streams.

Each replica owns an :class:`RngStream` identified by (seed, stream_id).
Streams are built on the counter-based Philox bit generator seeded through
``numpy.random.SeedSequence(seed, spawn_key=(stream_id,))``, which gives
platform-independent, statistically independent streams for distinct ids and
bit-identical sequences for identical ids.

The same stream object can be consumed either from Python or from inside the
jit-compiled kernels: numba's Generator support draws bit-for-bit the same
variates as NumPy's, which keeps the fast and the fallback integration paths
interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RngStream:
    """A stateful variate stream derived from a 64-bit master seed.

    Attributes:
        seed: master seed shared by all streams of one run.
        stream_id: replica index; distinct ids give independent streams.
    """

    seed: int
    stream_id: int = 0
    _generator: np.random.Generator | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError(f"seed {self.seed} outside [0, 2**64)")
        if self.stream_id < 0:
            raise ValueError(f"stream_id {self.stream_id} must be >= 0")

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy Generator (created on first use)."""
        if self._generator is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
            self._generator = np.random.Generator(np.random.Philox(seq))
        return self._generator

    def substream(self, offset: int) -> "RngStream":
        """A fresh stream with id ``stream_id + offset`` (same master seed)."""
        return RngStream(self.seed, self.stream_id + offset)

    # Thin draws used by the step-level operations; simulation kernels pull
    # from .generator directly in the same (uniform, normal, normal) order.
    def random(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)
