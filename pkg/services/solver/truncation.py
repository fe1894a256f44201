from dataclasses import dataclass
from typing import Optional

import numpy as np

from services.chain.chain_model import ChainModel
from services.solver.integrator import check_distribution, default_grid, integrate
from services.utils.aspect import performance_log
from services.utils.parallel import parallel_map
from utils.config import DEFAULT_TOL, DOUBLING_TOLERANCE
from utils.logging_config import get_component_logger

logger = get_component_logger("solver")


@dataclass(frozen=True)
class DoublingReport:
    max_gap: float
    N: int
    flagged: bool
    tolerance: float = DOUBLING_TOLERANCE


@performance_log
def truncation_doubling(
    model: ChainModel,
    N: int,
    p0: np.ndarray,
    t_end: float,
    tol: float = DEFAULT_TOL,
    grid: Optional[np.ndarray] = None,
    tolerance: float = DOUBLING_TOLERANCE,
) -> DoublingReport:
    """Compare truncations N and 2N from the same (zero-padded) start.

    The gap is the largest l1 distance over the grid on states {0..N}.
    """
    p0 = check_distribution(p0, N)
    grid = default_grid(t_end) if grid is None else np.asarray(grid, dtype=float)
    padded = np.concatenate([p0, np.zeros(N)])
    small, large = parallel_map(
        lambda job: integrate(model, job[0], job[1], t_end, tol, grid),
        [(N, p0), (2 * N, padded)],
    )
    gap = float(np.max(np.abs(small.probs - large.probs[:, : N + 1]).sum(axis=1)))
    report = DoublingReport(max_gap=gap, N=N, flagged=gap > tolerance, tolerance=tolerance)
    if report.flagged:
        logger.warning(f"Truncation N={N} inadequate: doubling gap {gap:.3e} > {tolerance:g}")
    else:
        logger.info(f"Truncation N={N} adequate: doubling gap {gap:.3e}")
    return report
