from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from utils.logging_config import get_component_logger

logger = get_component_logger("bounds")


class ScalingRule(str, Enum):
    """How diagonal magnitudes |d_k| depend on the sign pattern of u.

    GEOMETRIC       |d_k| = delta^(k-1) for every pattern.
    PAIR_SERVICE   (1, 1/delta, delta, delta^2, ...) on patterns with
                    sign(u_1) == sign(u_2), delta^(k-1) otherwise.
    PAIR_SERVICE_LITERAL   the special magnitudes only on the all-positive pattern.
                    Leaves column 1 with sum lambda*(delta - 1) > 0 on other
                    patterns with equal leading signs, so it does not certify.
    """

    GEOMETRIC = "geometric"
    PAIR_SERVICE = "pair-service"
    PAIR_SERVICE_LITERAL = "pair-service-literal"


@dataclass(frozen=True)
class ScalingFamily:
    rule: ScalingRule
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "rule", ScalingRule(self.rule))
        if not self.delta > 1.0 or not np.isfinite(self.delta):
            logger.error(f"Rejected scaling family with delta={self.delta}")
            raise ValueError(f"delta must be a finite number > 1, got {self.delta}")

    @property
    def name(self) -> str:
        return self.rule.value

    @property
    def pattern_independent(self) -> bool:
        return self.rule is ScalingRule.GEOMETRIC

    def profiles(self, S: int) -> np.ndarray:
        """Distinct magnitude vectors of length S, one row per profile.

        Row 0 is always the geometric profile.
        """
        k = np.arange(S, dtype=float)
        with np.errstate(over="ignore"):
            geometric = self.delta**k
            special = self.delta ** (k - 1.0)
        if self.pattern_independent:
            return geometric[None, :]
        special[0] = 1.0
        if S > 1:
            special[1] = 1.0 / self.delta
        return np.vstack([geometric, special])

    def profile_index(self, signs: np.ndarray) -> np.ndarray:
        """Profile row used by each sign pattern (rows of ``signs``)."""
        signs = np.atleast_2d(signs)
        if self.pattern_independent or signs.shape[1] < 2:
            return np.zeros(signs.shape[0], dtype=int)
        if self.rule is ScalingRule.PAIR_SERVICE:
            return (signs[:, 0] == signs[:, 1]).astype(int)
        return np.all(signs == signs[:, :1], axis=1).astype(int)

    def magnitudes(self, signs: np.ndarray) -> np.ndarray:
        """|d_k| for one pattern (1-d) or a stack of patterns (2-d)."""
        signs = np.asarray(signs)
        flat = signs.ndim == 1
        stack = np.atleast_2d(signs)
        mags = self.profiles(stack.shape[1])[self.profile_index(stack)]
        return mags[0] if flat else mags

    def signed_diagonal(self, signs: np.ndarray) -> np.ndarray:
        signs = np.where(np.asarray(signs) < 0, -1.0, 1.0)
        return signs * self.magnitudes(signs)

    def d_inf(self, S: int = 2) -> float:
        """inf_k |d_k| over every pattern."""
        return float(self.profiles(max(S, 2)).min())

    def d_hat(self, S: int) -> float:
        """Largest ratio of adjacent magnitudes over every pattern."""
        prof = self.profiles(max(S, 2))
        ratios = np.maximum(prof[:, 1:] / prof[:, :-1], prof[:, :-1] / prof[:, 1:])
        return float(ratios.max())

    def d_star(self, n: int) -> np.ndarray:
        """Weights d*(1) .. d*(n): the largest magnitude ratio among the first k."""
        if n < 1:
            return np.zeros(0)
        prof = self.profiles(n)
        with np.errstate(over="ignore"):
            running_max = np.maximum.accumulate(prof, axis=1)
            running_min = np.minimum.accumulate(prof, axis=1)
            return (running_max / running_min).max(axis=0)

    def describe(self) -> str:
        return f"{self.name}(delta={self.delta:g})"

    def to_config(self) -> dict:
        return {"rule": self.name, "delta": self.delta}


def weighted_norm(weights: np.ndarray, v: np.ndarray) -> float:
    """sum_k w_k |v_k|, skipping zero coordinates so infinite weights stay harmless."""
    v = np.asarray(v, dtype=float)
    n = min(len(weights), len(v))
    w, a = weights[:n], np.abs(v[:n])
    live = a != 0.0
    return float(np.sum(w[live] * a[live]))


def enumerate_patterns(S: int, start: int, stop: int) -> np.ndarray:
    """Sign patterns with s_1 = +1, indices [start, stop) of 2^(S-1).

    Bit (S-2) of the index, the most significant, drives s_2, so index order
    is lexicographic with + before -.
    """
    idx = np.arange(start, stop, dtype=np.int64)[:, None]
    shifts = np.arange(S - 2, -1, -1, dtype=np.int64)[None, :]
    bits = (idx >> shifts) & 1
    signs = np.ones((idx.shape[0], S))
    signs[:, 1:] = 1.0 - 2.0 * bits
    return signs


def block_patterns(S: int) -> np.ndarray:
    """Patterns with s_1 = +1 and at most two sign changes along the index."""
    rows = [np.ones(S)]
    for a in range(1, S):
        one = np.ones(S)
        one[a:] = -1.0
        rows.append(one)
        for b in range(a + 1, S):
            two = np.ones(S)
            two[a:b] = -1.0
            rows.append(two)
    patterns = np.array(rows)
    # lexicographic, + before -
    order = np.lexsort(patterns.T[::-1])[::-1]
    return patterns[order]


def pattern_tuple(signs: np.ndarray) -> Tuple[int, ...]:
    return tuple(int(s) for s in np.where(np.asarray(signs) < 0, -1, 1))
