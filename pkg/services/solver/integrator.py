from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from services.chain.chain_model import ChainModel
from services.chain.generator import banded_matvec
from services.transform.evaluator import MatrixEvaluator
from services.utils.aspect import performance_log
from utils.config import (
    ATOL_FACTOR,
    DEFAULT_GRID_POINTS,
    DEFAULT_TOL,
    MAX_TOL,
    MIN_TOL,
    NEGATIVE_PROBABILITY_SLACK,
    NORMALIZATION_DRIFT_WARN,
    STIFFNESS_LIMIT,
)
from utils.logging_config import get_component_logger

logger = get_component_logger("solver")

SIMPLEX_TOLERANCE = 1e-9


class IntegrationError(RuntimeError):
    """The stepper could not reach the requested time at the requested accuracy."""


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # (T,)
    probs: np.ndarray  # (T, N+1)

    @property
    def N(self) -> int:
        return self.probs.shape[1] - 1

    @property
    def final(self) -> np.ndarray:
        return self.probs[-1]

    def normalization_drift(self) -> float:
        return float(np.max(np.abs(self.probs.sum(axis=1) - 1.0)))

    def min_probability(self) -> float:
        return float(self.probs.min())

    def clamped(self) -> np.ndarray:
        """Probabilities with tiny negative excursions set to zero, for reports."""
        return np.where(
            (self.probs < 0.0) & (self.probs >= -NEGATIVE_PROBABILITY_SLACK), 0.0, self.probs
        )


def default_grid(t_end: float, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    return np.linspace(0.0, t_end, points + 1)


def point_mass(N: int, state: int) -> np.ndarray:
    if not 0 <= state <= N:
        raise ValueError(f"state {state} outside {{0..{N}}}")
    p = np.zeros(N + 1)
    p[state] = 1.0
    return p


def check_distribution(p0: np.ndarray, N: int) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (N + 1,):
        raise ValueError(f"initial distribution must have length N+1={N + 1}, got {p0.shape}")
    if p0.min() < -NEGATIVE_PROBABILITY_SLACK or abs(p0.sum() - 1.0) > SIMPLEX_TOLERANCE:
        logger.error(f"Initial vector off the simplex: min={p0.min():.3e}, sum={p0.sum():.12g}")
        raise ValueError("initial distribution must be nonnegative and sum to 1")
    return p0


def _segments(model: ChainModel, t_end: float) -> Sequence[float]:
    """Knots at rate discontinuities so no step straddles a jump."""
    jumps = {b for r in model.rates for b in r.breakpoints if 0.0 < b < t_end}
    return [0.0] + sorted(jumps) + [t_end]


@performance_log
def integrate(
    model: ChainModel,
    N: int,
    p0: np.ndarray,
    t_end: float,
    tol: float = DEFAULT_TOL,
    grid: Optional[np.ndarray] = None,
    evaluator: Optional[MatrixEvaluator] = None,
) -> Trajectory:
    """Solve dp/dt = A(t) p on [0, t_end] with Dormand-Prince 5(4).

    ``tol`` is the relative tolerance; the absolute tolerance is
    ``tol * ATOL_FACTOR``. The solution is returned on ``grid`` through the
    stepper's dense output.
    """
    if not MIN_TOL <= tol <= MAX_TOL:
        raise ValueError(f"tol must lie in [{MIN_TOL}, {MAX_TOL}], got {tol}")
    if not t_end > 0.0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    p0 = check_distribution(p0, N)
    grid = default_grid(t_end) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or grid[0] < 0.0 or grid[-1] > t_end or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be ascending within [0, t_end]")

    L = model.L if model.L is not None else model.rate_ceiling()
    if L * t_end > STIFFNESS_LIMIT:
        logger.error(f"Stiffness limit exceeded: L*t_end = {L * t_end:.3g} > {STIFFNESS_LIMIT:g}")
        raise IntegrationError(
            f"L*t_end = {L * t_end:.3g} exceeds the explicit-stepper limit {STIFFNESS_LIMIT:g}; "
            "shorten the horizon"
        )

    evaluator = evaluator if evaluator is not None and evaluator.N == N else MatrixEvaluator(model, N)
    if model.is_constant:
        ab = evaluator.generator(0.0).ab
        rhs = lambda t, p: banded_matvec(ab, model.R, p)  # noqa: E731
    else:
        rhs = evaluator.apply

    knots = _segments(model, t_end)
    probs = np.empty((grid.size, N + 1))
    state = p0
    for k, (a, b) in enumerate(zip(knots[:-1], knots[1:])):
        last = k == len(knots) - 2
        in_segment = (grid >= a) & ((grid <= b) if last else (grid < b))
        # b is always evaluated so the next segment starts from it
        t_eval = np.append(grid[in_segment], b) if not last else grid[in_segment]
        sol = solve_ivp(
            rhs,
            (a, b),
            state,
            method="RK45",
            t_eval=t_eval,
            rtol=tol,
            atol=tol * ATOL_FACTOR,
        )
        if sol.status != 0:
            reached = sol.t[-1] if sol.t.size else a
            logger.error(f"Integration failed on [{a:g}, {b:g}] near t={reached:g}: {sol.message}")
            raise IntegrationError(f"stiff segment [{a:g}, {b:g}]: stepper stopped near t={reached:g} ({sol.message})")
        n_grid = int(in_segment.sum())
        probs[in_segment] = sol.y[:, :n_grid].T
        if not last:
            state = sol.y[:, -1]

    trajectory = Trajectory(times=grid, probs=probs)
    drift = trajectory.normalization_drift()
    if drift > NORMALIZATION_DRIFT_WARN:
        logger.warning(f"Normalization drift {drift:.3e} exceeds {NORMALIZATION_DRIFT_WARN:g} (N={N}, tol={tol:g})")
    else:
        logger.debug(f"Integrated N={N} to t={t_end:g}; drift {drift:.2e}")
    if trajectory.min_probability() < -NEGATIVE_PROBABILITY_SLACK:
        logger.warning(f"Negative probability {trajectory.min_probability():.3e} in trajectory")
    return trajectory
