"""Truncated transposed intensity matrix A(t) in banded storage.

A(t) is the transpose of Q(t): a jump j -> i sits at row i, column j, so
dp/dt = A(t) p. Entry (i, j) is kept at ``ab[R + i - j, j]``; the diagonal
is row ``R``. Jumps leaving {0..N} are dropped and the diagonal only
accounts for jumps that stay, so every column sums to zero.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from services.chain.chain_model import ChainModel, RateChannel
from utils.logging_config import get_component_logger

logger = get_component_logger("chain")


@dataclass(frozen=True)
class GeneratorMatrix:
    ab: np.ndarray  # (2R+1, N+1) banded storage
    R: int
    t: float = 0.0

    @property
    def size(self) -> int:
        return self.ab.shape[1]

    @property
    def N(self) -> int:
        return self.size - 1

    def dense(self) -> np.ndarray:
        return banded_to_dense(self.ab, self.R)

    def column_sums(self) -> np.ndarray:
        return self.ab.sum(axis=0)


def banded_to_dense(ab: np.ndarray, R: int) -> np.ndarray:
    n = ab.shape[1]
    dense = np.zeros((n, n))
    for offset in range(-R, R + 1):
        if abs(offset) >= n:
            continue
        cols = np.arange(max(0, -offset), min(n, n - offset))
        dense[cols + offset, cols] = ab[R + offset, cols]
    return dense


def banded_matvec(ab: np.ndarray, R: int, x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    y = ab[R] * x
    for k in range(1, min(R, n - 1) + 1):
        y[k:] += ab[R + k, : n - k] * x[: n - k]
        y[: n - k] += ab[R - k, k:] * x[k:]
    return y


def channel_band(channel: RateChannel, N: int, R: int) -> np.ndarray:
    """Banded A for a unit base rate on one channel (multipliers included)."""
    ab = np.zeros((2 * R + 1, N + 1))
    m = channel.multipliers.sequence(N + 1)
    k = channel.jump
    src = np.arange(N + 1)
    keep = (src + k >= 0) & (src + k <= N)
    ab[R + k, src[keep]] = m[keep]
    ab[R, src[keep]] -= m[keep]
    return ab


def channel_bands(model: ChainModel, N: int) -> List[np.ndarray]:
    check_truncation(model, N)
    bands = [channel_band(ch, N, model.R) for ch in model.channels]
    for b in bands:
        b.setflags(write=False)
    return bands


def check_truncation(model: ChainModel, N: int):
    if isinstance(N, bool) or int(N) != N:
        raise ValueError(f"truncation size N must be an integer, got {N!r}")
    if N < model.R:
        logger.error(f"Truncation N={N} is below the band limit R={model.R}")
        raise ValueError(f"truncation size N={N} must be >= R={model.R}")


def generator(model: ChainModel, N: int, t: float) -> GeneratorMatrix:
    """A(t) truncated to states {0..N}."""
    check_truncation(model, N)
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    ab = np.zeros((2 * model.R + 1, N + 1))
    for ch in model.channels:
        rate = ch.rate.eval(t)
        if rate != 0.0:
            ab += rate * channel_band(ch, N, model.R)
    return GeneratorMatrix(ab=ab, R=model.R, t=float(t))
