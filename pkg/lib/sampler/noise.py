from __future__ import annotations

from enum import IntEnum

import numpy as np

from lib.utils import ParameterError

# chains per independently seeded block
BLOCK_SIZE = 1024


class Stream(IntEnum):
    LATENT = 0
    STEP = 1
    DATA = 2


class NoiseStream:
    """Counter-keyed standard normal draws.

    Row ``c`` of ``normal(stream, key, start, stop)`` depends only on (seed, stream, key, c):
    chains are grouped in fixed blocks, each block seeded from its own ``SeedSequence``, so
    any batch partition of the chains sees the same numbers.
    """

    def __init__(self, seed: int, d: int) -> None:
        if d < 1:
            raise ParameterError(f"dimension must be positive, got {d}")
        if seed < 0:
            raise ParameterError(f"seed must be nonnegative, got {seed}")
        self.seed = int(seed)
        self.d = int(d)

    def _block(self, stream: Stream, key: int, block: int) -> np.ndarray:
        sequence = np.random.SeedSequence([self.seed, int(stream), int(key), int(block)])
        return np.random.default_rng(sequence).standard_normal((BLOCK_SIZE, self.d))

    def normal(self, stream: Stream, key: int, start: int, stop: int) -> np.ndarray:
        if not 0 <= start <= stop:
            raise ParameterError(f"invalid chain range [{start}, {stop})")
        if start == stop:
            return np.empty((0, self.d))

        first, last = start // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE
        blocks = np.concatenate([self._block(stream, key, b) for b in range(first, last + 1)])
        offset = first * BLOCK_SIZE
        return blocks[start - offset : stop - offset]

    def latent(self, start: int, stop: int) -> np.ndarray:
        return self.normal(Stream.LATENT, 0, start, stop)

    def step_noise(self, t: int, start: int, stop: int) -> np.ndarray:
        return self.normal(Stream.STEP, t, start, stop)

    def data_noise(self, key: int, start: int, stop: int) -> np.ndarray:
        return self.normal(Stream.DATA, key, start, stop)
