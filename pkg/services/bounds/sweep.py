from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from services.bounds.alpha import EXHAUSTIVE
from services.bounds.certificate import ConvergenceBound, convergence_certificate
from services.bounds.scaling import ScalingFamily, ScalingRule
from services.chain.chain_model import ChainModel
from services.transform.evaluator import MatrixEvaluator
from services.utils.aspect import performance_log
from services.utils.parallel import parallel_map
from utils.config import DEFAULT_GRID_POINTS
from utils.logging_config import get_component_logger

logger = get_component_logger("bounds")


@dataclass(frozen=True)
class SweepRow:
    delta: float
    beta: float
    M: float
    prefactor: float
    certified: bool


@dataclass(frozen=True)
class SweepTable:
    rows: List[SweepRow]
    best_index: int

    @property
    def best(self) -> SweepRow:
        return self.rows[self.best_index]

    @property
    def any_certified(self) -> bool:
        return any(row.certified for row in self.rows)


@performance_log
def sweep_delta(
    model: ChainModel,
    rule: ScalingRule,
    S: int,
    deltas: Sequence[float],
    horizon: float = 1.0,
    grid_points: int = DEFAULT_GRID_POINTS,
    mode: str = EXHAUSTIVE,
    delta_max: Optional[float] = None,
) -> SweepTable:
    """One certificate per delta; the best row has the largest beta (first on ties)."""
    deltas = [float(d) for d in deltas]
    if not deltas:
        logger.error("delta sweep called with an empty grid")
        raise ValueError("delta grid must not be empty")
    if delta_max is not None and max(deltas) > delta_max:
        raise ValueError(f"delta grid exceeds delta_max={delta_max}")
    families = [ScalingFamily(rule, d) for d in deltas]  # validates delta > 1
    evaluator = MatrixEvaluator(model, model.R)
    evaluator.bstar_block(S, 0.0)

    def certify(family: ScalingFamily) -> ConvergenceBound:
        return convergence_certificate(model, family, S, horizon, grid_points, mode, evaluator)

    rows = [
        SweepRow(delta=b.delta, beta=b.beta, M=b.M, prefactor=b.prefactor, certified=b.certified)
        for b in parallel_map(certify, families)
    ]
    best = int(np.argmax([row.beta for row in rows]))
    logger.info(f"delta sweep over {len(rows)} points: best delta={rows[best].delta:g}, beta={rows[best].beta:.6g}")
    return SweepTable(rows=rows, best_index=best)
