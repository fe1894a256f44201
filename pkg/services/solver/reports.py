from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from services.bounds.alpha import alpha_of_matrix
from services.bounds.certificate import ConvergenceBound
from services.bounds.scaling import ScalingFamily
from services.chain.chain_model import ChainModel
from services.solver.integrator import Trajectory, integrate
from services.transform.conjugation import tail_sums
from services.transform.evaluator import MatrixEvaluator
from services.utils.aspect import performance_log
from services.utils.parallel import parallel_map
from utils.config import (
    CONTRACTION_FLOOR,
    CONTRACTION_SLACK,
    DEFAULT_TOL,
    DOMINANCE_SLACK,
    FIT_FLOOR,
    MAX_REPORT_PAIR_INDEX,
    SIGN_DEAD_BAND,
)
from utils.logging_config import get_component_logger

logger = get_component_logger("solver")

CSV_COLUMNS = ("t", "gap1", "gap_weighted", "bound", "holds")


def compute_u(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """u_k = sum_{i>=k} (pa_i - pb_i) for k = 1..N (works row-wise on stacks)."""
    pa, pb = np.asarray(pa, dtype=float), np.asarray(pb, dtype=float)
    if pa.shape != pb.shape:
        raise ValueError(f"distributions must have equal shapes, got {pa.shape} and {pb.shape}")
    return tail_sums(pa - pb)[..., 1:]


def default_pair(N: int) -> Tuple[int, int]:
    """Extreme starting pair (0, m) with m = min(50, N // 3)."""
    return 0, max(1, min(MAX_REPORT_PAIR_INDEX, N // 3))


def fit_decay_rate(times: np.ndarray, gaps: np.ndarray, floor: float = FIT_FLOOR) -> float:
    """Least-squares decay rate of log gap over the tail half of the grid.

    Points at or below ``floor`` are solver noise and are left out;
    ``nan`` if fewer than three points remain.
    """
    times, gaps = np.asarray(times, dtype=float), np.asarray(gaps, dtype=float)
    tail = slice(times.size // 2, None)
    t, g = times[tail], gaps[tail]
    keep = g > floor
    if keep.sum() < 3:
        return float("nan")
    slope = np.polyfit(t[keep], np.log(g[keep]), 1)[0]
    return float(-slope)


@dataclass
class PairReport:
    times: np.ndarray
    gap1: np.ndarray
    gap_weighted: np.ndarray
    bound: np.ndarray
    fitted_rate: float
    holds: Optional[bool]  # None when the certificate is not certified
    pair: Tuple[int, int]
    tv_monotonicity_excess: float = 0.0
    normalization_drift: float = 0.0
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def pointwise_holds(self) -> np.ndarray:
        return self.gap1 <= self.bound * (1.0 + DOMINANCE_SLACK)

    @property
    def min_margin(self) -> float:
        """Smallest bound / gap ratio over points with a nonzero gap."""
        live = self.gap1 > 0.0
        if not np.any(live):
            return float("inf")
        return float(np.min(self.bound[live] / self.gap1[live]))

    def rows(self) -> List[Tuple]:
        ok = self.pointwise_holds
        return [
            (float(t), float(g), float(w), float(b), int(bool(h)) if self.holds is not None else "na")
            for t, g, w, b, h in zip(self.times, self.gap1, self.gap_weighted, self.bound, ok)
        ]

    def summary(self) -> dict:
        return {
            "holds": "na" if self.holds is None else self.holds,
            "fitted_rate": self.fitted_rate,
            "min_margin": self.min_margin,
            "final_gap1": float(self.gap1[-1]),
            "pair": list(self.pair),
            "tv_monotonicity_excess": self.tv_monotonicity_excess,
            "normalization_drift": self.normalization_drift,
            **self.extras,
        }


@performance_log
def pair_report(
    model: ChainModel,
    N: int,
    p0a: np.ndarray,
    p0b: np.ndarray,
    grid: np.ndarray,
    certificate: ConvergenceBound,
    tol: float = DEFAULT_TOL,
    pair: Tuple[int, int] = (0, 0),
) -> Tuple[PairReport, Tuple[Trajectory, Trajectory]]:
    """Integrate both starts and compare their distance with the certificate."""
    grid = np.asarray(grid, dtype=float)
    t_end = float(grid[-1])
    evaluator = MatrixEvaluator(model, N)
    traj_a, traj_b = parallel_map(
        lambda p0: integrate(model, N, p0, t_end, tol, grid, evaluator), [p0a, p0b]
    )
    diff = traj_a.probs - traj_b.probs
    gap1 = np.abs(diff).sum(axis=1)
    u = tail_sums(diff)[:, 1:]
    weights = certificate.weights(N)
    with np.errstate(invalid="ignore", over="ignore"):
        gap_w = np.where(np.abs(u) > 0.0, weights * np.abs(u), 0.0).sum(axis=1)
    bound = certificate.bound(grid, p0a, p0b)
    holds: Optional[bool] = None
    if certificate.certified:
        holds = bool(np.all(gap1 <= bound * (1.0 + DOMINANCE_SLACK)))
        if not holds:
            worst = int(np.argmax(gap1 - bound))
            logger.warning(f"Bound violated at t={grid[worst]:g}: gap {gap1[worst]:.6e} > bound {bound[worst]:.6e}")
    else:
        logger.warning("Certificate not certified; pair report produced without a verdict")
    report = PairReport(
        times=grid,
        gap1=gap1,
        gap_weighted=gap_w,
        bound=bound,
        fitted_rate=fit_decay_rate(grid, gap1),
        holds=holds,
        pair=pair,
        tv_monotonicity_excess=float(np.max(np.diff(gap1), initial=0.0)),
        normalization_drift=max(traj_a.normalization_drift(), traj_b.normalization_drift()),
    )
    logger.info(
        f"Pair {pair}: fitted rate {report.fitted_rate:.4g}, final gap {gap1[-1]:.3e}, "
        f"holds={'n/a' if holds is None else holds}"
    )
    return report, (traj_a, traj_b)


@dataclass(frozen=True)
class ContractionReport:
    intervals: int
    checks: int
    worst_excess: float  # max of lhs / rhs - 1 over checked points
    holds: bool


def _pattern(u: np.ndarray, dead_band: float) -> Tuple[int, ...]:
    return tuple(int(s) for s in np.where(np.abs(u) <= dead_band, 0, np.sign(u)))


def sign_interval_contraction(
    model: ChainModel,
    N: int,
    times: np.ndarray,
    u: np.ndarray,
    family: ScalingFamily,
    dead_band: float = SIGN_DEAD_BAND,
    slack: float = CONTRACTION_SLACK,
    floor: float = CONTRACTION_FLOOR,
) -> ContractionReport:
    """Check ||D u(t)||_1 <= e^{-int_s^t alpha_D} ||D u(s)||_1 on constant-pattern intervals.

    ``u`` holds u(t) of the truncation to {0..N}, one row per grid time. The
    pattern ignores coordinates inside the dead band; those are also left
    out of D, of the norm and of alpha_D. Points where ||u||_1 < ``floor``
    break intervals and are not checked.
    """
    times = np.asarray(times, dtype=float)
    u = np.asarray(u, dtype=float)
    evaluator = MatrixEvaluator(model, N)
    cache: Dict[Tuple[float, Tuple[int, ...]], float] = {}

    def alpha_D(t: float, live: np.ndarray, D: np.ndarray, key: Tuple[int, ...]) -> float:
        t_key = 0.0 if model.is_constant else t
        if (t_key, key) not in cache:
            bstar = evaluator.conjugated(t_key).values[np.ix_(live, live)]
            cache[(t_key, key)] = alpha_of_matrix(bstar, D)
        return cache[(t_key, key)]

    patterns = [
        _pattern(row, dead_band) if np.abs(row).sum() >= floor else None for row in u
    ]
    intervals, checks, worst = 0, 0, -np.inf
    k = 0
    while k < len(times):
        pattern = patterns[k]
        end = k
        while end + 1 < len(times) and patterns[end + 1] == pattern:
            end += 1
        if pattern is not None and any(pattern) and end > k:
            signs = np.array(pattern, dtype=float)
            live = np.nonzero(signs)[0]
            D = family.signed_diagonal(np.where(signs == 0, 1.0, signs))[live]
            span = times[k : end + 1]
            rates = np.array([alpha_D(t, live, D, pattern) for t in span])
            decay = cumulative_trapezoid(rates, span, initial=0.0)
            norms = np.abs(D * u[k : end + 1][:, live]).sum(axis=1)
            excess = norms[1:] / (np.exp(-decay[1:]) * norms[0]) - 1.0
            worst = max(worst, float(excess.max()))
            intervals += 1
            checks += end - k
        k = end + 1
    holds = worst <= slack
    if not holds:
        logger.warning(f"Contraction inequality exceeded by {worst:.3e} on a constant-pattern interval")
    logger.debug(f"Sign-interval contraction: {intervals} intervals, {checks} checks, worst excess {worst:.3e}")
    return ContractionReport(intervals=intervals, checks=checks, worst_excess=float(max(worst, -1.0)), holds=bool(holds))
