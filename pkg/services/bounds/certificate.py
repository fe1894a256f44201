from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from services.bounds.alpha import EXHAUSTIVE, alpha_star_trace
from services.bounds.envelope import BETA_FLOOR, analysis_grid, fit_envelope
from services.bounds.scaling import ScalingFamily, weighted_norm
from services.chain.chain_model import ChainModel
from services.transform.conjugation import tail_sums
from services.transform.evaluator import MatrixEvaluator
from services.utils.aspect import performance_log
from utils.config import DEFAULT_GRID_POINTS
from utils.logging_config import get_component_logger

logger = get_component_logger("bounds")


@dataclass(frozen=True)
class ConvergenceBound:
    """Uniform geometric bound on the distance between two solutions.

        ||p*(t) - p**(t)||_1 <= (2M/d) e^{-beta t} ||.||_{1,D*}

    The weighted initial norm is either the coordinate difference of the two
    starts or its tail-sum transform u(0); both are reported and ``bound``
    uses the larger.
    """

    family: ScalingFamily
    S: int
    beta: float
    M: float
    d: float
    d_star: Tuple[float, ...]
    grid: Tuple[float, ...]
    alpha_star_trace: Tuple[float, ...]
    envelope_mode: str
    exhaustive: bool
    period: Optional[float] = None
    beta_overridden: bool = field(default=False)

    @property
    def delta(self) -> float:
        return self.family.delta

    @property
    def prefactor(self) -> float:
        return 2.0 * self.M / self.d

    @property
    def certified(self) -> bool:
        return self.beta > BETA_FLOOR

    def weights(self, n: int) -> np.ndarray:
        """d*(1) .. d*(n)."""
        return self.family.d_star(n)

    def initial_norms(self, p0a: np.ndarray, p0b: np.ndarray) -> Tuple[float, float]:
        diff = np.asarray(p0a, dtype=float) - np.asarray(p0b, dtype=float)
        if diff.size < 2:
            return 0.0, 0.0
        w = self.weights(diff.size - 1)
        return weighted_norm(w, diff[1:]), weighted_norm(w, tail_sums(diff)[1:])

    def rhs(self, t, p0a: np.ndarray, p0b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Both right-hand sides at time(s) t: (difference norm, u(0) norm)."""
        if not self.certified:
            inf = np.full(np.shape(t), np.inf)
            return inf, inf
        w_diff, w_u = self.initial_norms(p0a, p0b)
        decay = self.prefactor * np.exp(-self.beta * np.asarray(t, dtype=float))
        with np.errstate(invalid="ignore"):
            return _scaled(decay, w_diff), _scaled(decay, w_u)

    def bound(self, t, p0a: np.ndarray, p0b: np.ndarray) -> np.ndarray:
        return np.maximum(*self.rhs(t, p0a, p0b))

    def with_beta(self, beta: float) -> "ConvergenceBound":
        logger.warning(f"Certificate beta overridden: {self.beta:.6g} -> {beta:.6g}")
        return replace(self, beta=float(beta), beta_overridden=True)

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "beta": self.beta,
            "M": self.M,
            "d": self.d,
            "prefactor": self.prefactor,
            "certified": self.certified,
            "S": self.S,
            "grid": list(self.grid),
            "family": self.family.name,
            "exhaustive": self.exhaustive,
            "envelope_mode": self.envelope_mode,
            "period": self.period,
            "d_star": list(self.d_star),
            "alpha_star": list(self.alpha_star_trace),
            "beta_overridden": self.beta_overridden,
        }

    def summary(self) -> str:
        status = "certified" if self.certified else "NOT certified"
        return (
            f"{status}: beta={self.beta:.10g}, M={self.M:.10g}, d={self.d:.6g}, "
            f"prefactor={self.prefactor:.6g}, family={self.family.describe()}, S={self.S}"
            f"{'' if self.exhaustive else ' (heuristic patterns)'}"
        )


def _scaled(decay: np.ndarray, norm: float) -> np.ndarray:
    if norm == 0.0:
        return np.zeros_like(decay)
    return decay * norm


@performance_log
def convergence_certificate(
    model: ChainModel,
    family: ScalingFamily,
    S: int,
    horizon: float,
    grid_points: int = DEFAULT_GRID_POINTS,
    mode: str = EXHAUSTIVE,
    evaluator: Optional[MatrixEvaluator] = None,
) -> ConvergenceBound:
    """Assemble the convergence certificate from alpha* on the analysis grid."""
    grid = analysis_grid(model, horizon, grid_points)
    trace = alpha_star_trace(model, family, S, grid.times, mode, evaluator)
    envelope = fit_envelope(grid.times, trace.values, grid.mode)
    bound = ConvergenceBound(
        family=family,
        S=S,
        beta=envelope.beta,
        M=envelope.M,
        d=family.d_inf(S),
        d_star=tuple(float(w) for w in family.d_star(S)),
        grid=tuple(float(t) for t in grid.times),
        alpha_star_trace=tuple(float(a) for a in trace.values),
        envelope_mode=grid.mode,
        exhaustive=trace.exhaustive,
        period=grid.period,
    )
    if bound.certified:
        logger.info(bound.summary())
    else:
        logger.warning(bound.summary())
    return bound
