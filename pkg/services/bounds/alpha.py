"""Contraction rates alpha_D(t) and their minimum over sign patterns.

For a signed diagonal D, alpha_D is the largest alpha with every column
sum of D B* D^-1 at most -alpha:

    alpha_D = -max_j sum_i (d_i / d_j) b*_ij

alpha* minimizes alpha_D over the sign patterns of the coordinates, with D
taken from a scaling family. Patterns are counted modulo a global sign
flip, which leaves every ratio d_i / d_j unchanged.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from services.bounds.scaling import (
    ScalingFamily,
    block_patterns,
    enumerate_patterns,
    pattern_tuple,
)
from services.chain.chain_model import ChainModel
from services.transform.conjugation import ConjugatedMatrix
from services.transform.evaluator import MatrixEvaluator
from services.utils.parallel import parallel_map
from utils.config import MAX_EXHAUSTIVE_SIZE, PATTERN_CHUNK_ELEMENTS
from utils.logging_config import get_component_logger

logger = get_component_logger("bounds")

EXHAUSTIVE = "exhaustive"
HEURISTIC = "heuristic"
MODES = (EXHAUSTIVE, HEURISTIC)


class PatternLimitError(ValueError):
    """Exhaustive sign-pattern enumeration requested beyond the size cap."""


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    pattern: Tuple[int, ...]
    exhaustive: bool
    shortcut: bool = False


@dataclass(frozen=True)
class AlphaTrace:
    times: np.ndarray
    values: np.ndarray
    patterns: Tuple[Tuple[int, ...], ...]
    exhaustive: bool
    shortcut: bool


def alpha_of_matrix(bstar: np.ndarray, D: np.ndarray) -> float:
    """-max_j sum_i (d_i / d_j) b*_ij for an explicit S x S matrix."""
    D = np.asarray(D, dtype=float)
    if np.any(D == 0.0):
        raise ValueError("all diagonal entries of D must be nonzero")
    column_sums = (D @ bstar) / D
    return float(-column_sums.max())


def _check_size(model: ChainModel, S: int):
    if S < model.R + 2:
        logger.error(f"Block size S={S} below R+2={model.R + 2}")
        raise ValueError(f"block size S={S} must be >= R+2={model.R + 2}")


def alpha_for_D(
    model: ChainModel,
    S: int,
    D: np.ndarray,
    t: float,
    evaluator: Optional[MatrixEvaluator] = None,
) -> float:
    _check_size(model, S)
    evaluator = evaluator or MatrixEvaluator(model, model.R)
    return alpha_of_matrix(evaluator.bstar_block(S, t).values, D)


def _check_mode(mode: str, S: int):
    if mode not in MODES:
        raise ValueError(f"unknown pattern mode {mode!r} (expected one of {MODES})")
    if mode == EXHAUSTIVE and S > MAX_EXHAUSTIVE_SIZE:
        logger.error(f"Exhaustive enumeration refused at S={S}")
        raise PatternLimitError(
            f"exhaustive sign-pattern enumeration is limited to S <= {MAX_EXHAUSTIVE_SIZE} "
            f"(got S={S}); use mode='heuristic'"
        )


def _minimize_patterns(
    bstar: np.ndarray,
    family: ScalingFamily,
    patterns: np.ndarray,
) -> Tuple[float, int]:
    """(min alpha, index of first minimizer) over the rows of ``patterns``."""
    S = bstar.shape[0]
    prof = family.profiles(S)
    scaled = [bstar * np.outer(m, 1.0 / m) for m in prof]
    groups = family.profile_index(patterns)
    alphas = np.empty(patterns.shape[0])
    for g, M in enumerate(scaled):
        sel = groups == g
        if not np.any(sel):
            continue
        P = patterns[sel]
        column_sums = P * (P @ M)
        alphas[sel] = -column_sums.max(axis=1)
    best = int(np.argmin(alphas))
    return float(alphas[best]), best


def _minimize_exhaustive(bstar: np.ndarray, family: ScalingFamily) -> Tuple[float, np.ndarray]:
    S = bstar.shape[0]
    total = 1 << (S - 1)
    chunk = max(1, PATTERN_CHUNK_ELEMENTS // (S * S))
    best_alpha, best_pattern = np.inf, None
    for start in range(0, total, chunk):
        patterns = enumerate_patterns(S, start, min(total, start + chunk))
        alpha, idx = _minimize_patterns(bstar, family, patterns)
        if alpha < best_alpha:
            best_alpha, best_pattern = alpha, patterns[idx]
    return best_alpha, best_pattern


def _shortcut_applies(bstar: np.ndarray, family: ScalingFamily) -> bool:
    return family.pattern_independent and ConjugatedMatrix(bstar).is_essentially_nonnegative()


def alpha_star_matrix(bstar: np.ndarray, family: ScalingFamily, mode: str = EXHAUSTIVE) -> AlphaResult:
    """alpha* of one explicit B* block."""
    S = bstar.shape[0]
    _check_mode(mode, S)
    if _shortcut_applies(bstar, family):
        # essentially nonnegative: the all-positive pattern has the largest column sums
        positive = np.ones(S)
        alpha = alpha_of_matrix(bstar, family.signed_diagonal(positive))
        return AlphaResult(alpha, pattern_tuple(positive), exhaustive=True, shortcut=True)
    if mode == EXHAUSTIVE:
        alpha, pattern = _minimize_exhaustive(bstar, family)
        return AlphaResult(alpha, pattern_tuple(pattern), exhaustive=True)
    patterns = block_patterns(S)
    alpha, idx = _minimize_patterns(bstar, family, patterns)
    return AlphaResult(alpha, pattern_tuple(patterns[idx]), exhaustive=False)


def alpha_star(
    model: ChainModel,
    family: ScalingFamily,
    S: int,
    t: float,
    mode: str = EXHAUSTIVE,
    evaluator: Optional[MatrixEvaluator] = None,
) -> float:
    return alpha_star_detail(model, family, S, t, mode, evaluator).alpha


def alpha_star_detail(
    model: ChainModel,
    family: ScalingFamily,
    S: int,
    t: float,
    mode: str = EXHAUSTIVE,
    evaluator: Optional[MatrixEvaluator] = None,
) -> AlphaResult:
    _check_size(model, S)
    _check_mode(mode, S)
    evaluator = evaluator or MatrixEvaluator(model, model.R)
    return alpha_star_matrix(evaluator.bstar_block(S, t).values, family, mode)


def alpha_star_trace(
    model: ChainModel,
    family: ScalingFamily,
    S: int,
    times: Sequence[float],
    mode: str = EXHAUSTIVE,
    evaluator: Optional[MatrixEvaluator] = None,
) -> AlphaTrace:
    """alpha*(t) on a grid; time chunks run on the worker pool."""
    _check_size(model, S)
    _check_mode(mode, S)
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("alpha* trace needs at least one time instant")
    evaluator = evaluator or MatrixEvaluator(model, model.R)
    evaluator.bstar_block(S, float(times[0]))  # build the sub-evaluator before threads share it

    def run(chunk: np.ndarray) -> List[AlphaResult]:
        return [alpha_star_matrix(evaluator.bstar_block(S, float(t)).values, family, mode) for t in chunk]

    n_chunks = min(len(times), 8)
    results = [r for part in parallel_map(run, np.array_split(times, n_chunks)) for r in part]
    exhaustive = all(r.exhaustive for r in results)
    if not exhaustive:
        logger.warning(
            f"alpha* computed in heuristic mode at S={S}: minimum taken over "
            f"{len(block_patterns(S))} block patterns, not all {1 << (S - 1)}"
        )
    return AlphaTrace(
        times=times,
        values=np.array([r.alpha for r in results]),
        patterns=tuple(r.pattern for r in results),
        exhaustive=exhaustive,
        shortcut=all(r.shortcut for r in results),
    )
