from threading import Lock
from typing import Dict, List

import numpy as np

from services.chain.chain_model import ChainModel
from services.chain.generator import GeneratorMatrix, banded_matvec, channel_bands
from services.transform.conjugation import (
    ConjugatedMatrix,
    ReducedMatrix,
    conjugate_numeric,
    reduce,
    scale_D,
)
from utils.logging_config import get_component_logger

logger = get_component_logger("transform")


class MatrixEvaluator:
    """Time-indexed A(t), B(t), B*(t) and B**(t) at a fixed truncation size.

    The unit-rate band of every rate channel is assembled once; evaluating
    at a new instant only rescales and sums those bands.
    """

    def __init__(self, model: ChainModel, N: int):
        self.model = model
        self.N = int(N)
        self.R = model.R
        self._bands: List[np.ndarray] = channel_bands(model, self.N)
        self._blocks: Dict[int, "MatrixEvaluator"] = {}
        self._lock = Lock()
        logger.debug(f"MatrixEvaluator ready: N={self.N}, {model.describe()}")

    def _banded(self, t: float) -> np.ndarray:
        ab = np.zeros((2 * self.R + 1, self.N + 1))
        for ch, band in zip(self.model.channels, self._bands):
            rate = ch.rate.eval(t)
            if rate != 0.0:
                ab += rate * band
        return ab

    def generator(self, t: float) -> GeneratorMatrix:
        return GeneratorMatrix(ab=self._banded(t), R=self.R, t=float(t))

    def apply(self, t: float, p: np.ndarray) -> np.ndarray:
        """A(t) p, the right-hand side of the forward equations."""
        return banded_matvec(self._banded(t), self.R, p)

    def reduced(self, t: float) -> ReducedMatrix:
        return reduce(self.generator(t))

    def conjugated(self, t: float) -> ConjugatedMatrix:
        """B*(t) of this truncation (size N x N)."""
        return conjugate_numeric(self.reduced(t), R=self.R)

    def bstar_block(self, S: int, t: float) -> ConjugatedMatrix:
        """Principal S x S block of the untruncated B*(t)."""
        with self._lock:
            sub = self._blocks.get(S)
            if sub is None:
                sub = MatrixEvaluator(self.model, S + self.R)
                self._blocks[S] = sub
        full = sub.conjugated(t)
        return ConjugatedMatrix(values=full.values[:S, :S].copy(), R=self.R, t=float(t))

    def scaled(self, S: int, t: float, D: np.ndarray) -> ConjugatedMatrix:
        return scale_D(self.bstar_block(S, t), D)
