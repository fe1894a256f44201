from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from services.chain.chain_model import ChainModel
from utils.config import DEFAULT_GRID_POINTS
from utils.logging_config import get_component_logger

logger = get_component_logger("bounds")

CONSTANT = "constant"
PERIODIC = "periodic"
APERIODIC = "aperiodic"


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray
    mode: str
    period: Optional[float] = None


@dataclass(frozen=True)
class Envelope:
    """e^{-int_s^t alpha*} <= M e^{-beta (t - s)} for all s <= t."""

    M: float
    beta: float
    mode: str

    @property
    def certified(self) -> bool:
        return self.beta > BETA_FLOOR


# beta within roundoff of zero certifies nothing
BETA_FLOOR = 1e-12


def analysis_grid(model: ChainModel, horizon: float, grid_points: int = DEFAULT_GRID_POINTS) -> TimeGrid:
    """Instants where alpha* is evaluated.

    Constant rates need a single instant. Periodic rates need one period
    with ``grid_points`` intervals. Anything else gets ``grid_points``
    intervals over the horizon plus every rate breakpoint and extremum.
    """
    if grid_points < 1:
        raise ValueError(f"grid_points must be >= 1, got {grid_points}")
    if model.is_constant:
        return TimeGrid(times=np.array([0.0]), mode=CONSTANT)
    period = model.period
    if period is not None:
        return TimeGrid(times=np.linspace(0.0, period, grid_points + 1), mode=PERIODIC, period=period)
    if not horizon > 0.0:
        raise ValueError(f"aperiodic rates need a horizon > 0, got {horizon}")
    times = np.union1d(np.linspace(0.0, horizon, grid_points + 1), model.critical_times(horizon))
    return TimeGrid(times=times, mode=APERIODIC)


def fit_envelope(times: np.ndarray, alpha: np.ndarray, mode: str) -> Envelope:
    """(M, beta) from alpha* samples.

    Integrals of alpha* between grid points use the trapezoid rule on the
    sampled values.
    """
    times = np.asarray(times, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if times.size == 0 or times.shape != alpha.shape:
        raise ValueError("envelope fit needs matching, nonempty time and alpha arrays")
    if mode == CONSTANT or times.size == 1:
        beta = float(alpha.min())
        return _log_envelope(Envelope(M=1.0, beta=beta, mode=CONSTANT))

    span = times[-1] - times[0]
    if not span > 0.0:
        raise ValueError("envelope grid must span a positive interval")
    integral = cumulative_trapezoid(alpha, times, initial=0.0)
    if mode == PERIODIC:
        beta = float(integral[-1] / span)
        G = integral - beta * (times - times[0])
        # G is periodic, so the worst s <= t pair spans its full swing
        log_M = float(G.max() - G.min())
    elif mode == APERIODIC:
        beta = float(alpha.min())
        G = integral - beta * (times - times[0])
        log_M = float(np.max(np.maximum.accumulate(G) - G))
    else:
        raise ValueError(f"unknown envelope mode {mode!r}")
    return _log_envelope(Envelope(M=float(np.exp(max(log_M, 0.0))), beta=beta, mode=mode))


def _log_envelope(env: Envelope) -> Envelope:
    if env.certified:
        logger.debug(f"Envelope ({env.mode}): beta={env.beta:.12g}, M={env.M:.12g}")
    else:
        logger.warning(f"No positive exponential envelope: beta={env.beta:.6g} ({env.mode})")
    return env


def envelope_excess(times: np.ndarray, alpha: np.ndarray, envelope: Envelope, pairs: np.ndarray) -> float:
    """Largest e^{-int_s^t alpha} / (M e^{-beta (t - s)}) over index pairs (s, t)."""
    integral = cumulative_trapezoid(alpha, times, initial=0.0)
    s, t = pairs[:, 0], pairs[:, 1]
    log_lhs = -(integral[t] - integral[s])
    log_rhs = np.log(envelope.M) - envelope.beta * (times[t] - times[s])
    return float(np.exp(np.max(log_lhs - log_rhs)))
