"""Reduced matrix B, its T-conjugate B* = T B T^-1 and the rescaled B**.

T is the upper-triangular all-ones matrix, so (T v)_k = sum_{i>=k} v_i and
(T^-1 v)_k = v_k - v_{k+1}. Coordinates are 1-based in the mathematics and
0-based in the arrays: array index r holds coordinate r + 1.

Closed-form stencils of the infinite B* (row r, coordinate indices):

  class I    (r, r-1) = lambda_{r-1}   (r, r) = -(lambda_{r-1} + mu_r)   (r, r+1) = mu_r
  class III  (r, r-1) = lambda_{r-1}   (r, r) = -(lambda_{r-1} + sum_{m<=min(r,R)} b_m)
             (r, r+m) = b_m - b_{m+r}   with b_j = 0 for j > R
  class II   (r, r-k) = a_k   (r, r) = -(mu_r + sum a_k)   (r, r+1) = mu_r
  class IV   (r, r-k) = a_k   (r, r) = -(sum a_k + sum_{m<=min(r,R)} b_m)   (r, r+m) = b_m - b_{r+m}

For classes I and III the truncated numeric conjugate equals the stencil on
the whole block; for II and IV the last R columns differ.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from services.chain.chain_model import ChainClass, ChainModel
from services.chain.generator import GeneratorMatrix, generator
from utils.config import INJECTED_BUG_SIZE
from utils.logging_config import get_component_logger

logger = get_component_logger("transform")


@dataclass(frozen=True)
class ReducedMatrix:
    values: np.ndarray  # S x S, b_ij = a_ij - a_i0
    t: float = 0.0

    @property
    def S(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ConjugatedMatrix:
    values: np.ndarray  # S x S
    R: Optional[int] = None
    t: float = 0.0

    @property
    def S(self) -> int:
        return self.values.shape[0]

    def off_band_max(self) -> float:
        """Largest |entry| with |i - j| > R (0 for a banded matrix)."""
        if self.R is None:
            return 0.0
        i, j = np.indices(self.values.shape)
        mask = np.abs(i - j) > self.R
        return float(np.abs(self.values[mask]).max(initial=0.0))

    def is_essentially_nonnegative(self, slack: float = 0.0) -> bool:
        off = self.values - np.diag(np.diag(self.values))
        return bool(off.min(initial=0.0) >= -slack)


@dataclass(frozen=True)
class OracleDiscrepancy:
    value: float
    i: int  # 1-based coordinates
    j: int
    t: float
    method: str

    def passed(self, tolerance: float) -> bool:
        return self.value <= tolerance


def reduce(A: GeneratorMatrix) -> ReducedMatrix:
    """Eliminate p_0 through normalization: b_ij = a_ij - a_i0, i, j >= 1."""
    if A.size < 2:
        raise ValueError(f"reduction needs a generator of size >= 2, got {A.size}")
    dense = A.dense()
    return ReducedMatrix(values=dense[1:, 1:] - dense[1:, [0]], t=A.t)


def tail_sums(v: np.ndarray) -> np.ndarray:
    """(T v)_k = sum_{i>=k} v_i along the last axis."""
    v = np.asarray(v, dtype=float)
    return np.flip(np.cumsum(np.flip(v, axis=-1), axis=-1), axis=-1)


def conjugate_numeric(B: ReducedMatrix, R: Optional[int] = None) -> ConjugatedMatrix:
    """T B T^-1 through the actions of T and T^-1, without forming either."""
    values = np.asarray(B.values, dtype=float)
    right = values.copy()  # B T^-1: each column minus its left neighbour
    right[:, 1:] -= values[:, :-1]
    bstar = np.cumsum(right[::-1], axis=0)[::-1]  # T (.) : tail sums down each column
    return ConjugatedMatrix(values=np.ascontiguousarray(bstar), R=R, t=B.t)


def transform_matrices(S: int) -> Tuple[np.ndarray, np.ndarray]:
    T = np.triu(np.ones((S, S)))
    T_inv = np.eye(S) - np.eye(S, k=1)
    return T, T_inv


def conjugate_dense(B: ReducedMatrix, R: Optional[int] = None) -> ConjugatedMatrix:
    """Explicit dense product T B T^-1, used as an oracle."""
    T, T_inv = transform_matrices(B.S)
    return ConjugatedMatrix(values=T @ B.values @ T_inv, R=R, t=B.t)


def conjugated(model: ChainModel, N: int, t: float) -> ConjugatedMatrix:
    """Numeric B* of the truncation to {0..N} (size N x N)."""
    return conjugate_numeric(reduce(generator(model, N, t)), R=model.R)


def bstar_block(model: ChainModel, S: int, t: float) -> ConjugatedMatrix:
    """Principal S x S block of the infinite B*(t).

    Conjugating the truncation of size S + R leaves the first S columns
    untouched by the truncation edge.
    """
    full = conjugated(model, S + model.R, t)
    return ConjugatedMatrix(values=full.values[:S, :S].copy(), R=model.R, t=full.t)


def bstar_closed_form(model: ChainModel, S: int, t: float) -> ConjugatedMatrix:
    """Closed-form B* for classes I and III."""
    cls = model.chain_class
    if cls not in (ChainClass.I, ChainClass.III):
        logger.error(f"Closed form requested for class {cls.value}")
        raise ValueError(
            f"no closed form for class {cls.value}; use conjugate_numeric (its diagonal is not displayed)"
        )
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    R = model.R
    out = np.zeros((S, S))
    lam = model.birth_sequence(S + 1, t)  # lambda_0 .. lambda_S
    rows = np.arange(S)  # coordinate r = row + 1
    coord = rows + 1
    if rows.size > 1:
        out[rows[1:], rows[1:] - 1] = lam[coord[1:] - 1]
    if cls is ChainClass.I:
        mu = model.death_sequence(S + 1, t)
        out[rows, rows] = -(lam[coord - 1] + mu[coord])
        out[rows[:-1], rows[:-1] + 1] = mu[coord[:-1]]
    else:
        b = np.concatenate([[0.0], model.service_values(t), np.zeros(S + R + 1)])  # b[m], b_0 = 0
        cum_b = np.cumsum(b[: R + 1])
        out[rows, rows] = -(lam[coord - 1] + cum_b[np.minimum(coord, R)])
        for r in coord:
            for m in range(1, R + 1):
                if r + m <= S:
                    out[r - 1, r + m - 1] = b[m] - b[m + r]
    return ConjugatedMatrix(values=out, R=R, t=float(t))


def scale_D(Bstar: ConjugatedMatrix, D: np.ndarray) -> ConjugatedMatrix:
    """B** with entries (d_i / d_j) b*_ij."""
    D = np.asarray(D, dtype=float)
    if D.shape != (Bstar.S,):
        raise ValueError(f"D must have length {Bstar.S}, got shape {D.shape}")
    if np.any(D == 0.0):
        logger.error("scale_D received a zero diagonal entry")
        raise ValueError("all diagonal entries of D must be nonzero")
    return ConjugatedMatrix(values=Bstar.values * np.outer(D, 1.0 / D), R=Bstar.R, t=Bstar.t)


def oracle_discrepancy(
    model: ChainModel,
    S: int,
    times: Iterable[float],
    inject_bug: bool = False,
) -> OracleDiscrepancy:
    """Worst interior disagreement between two independent routes to B*.

    Classes I and III compare the closed-form stencil with the numeric
    conjugation; classes II and IV compare the numeric conjugation with the
    dense triple product. The interior block excludes the last R rows and
    columns. ``inject_bug`` perturbs the first reference entry so the
    check can be seen to fail.
    """
    if S <= model.R:
        raise ValueError(f"oracle block needs S > R, got S={S}, R={model.R}")
    closed = model.chain_class in (ChainClass.I, ChainClass.III)
    method = "closed-form" if closed else "dense-product"
    inner = S - model.R
    worst = OracleDiscrepancy(value=-1.0, i=0, j=0, t=0.0, method=method)
    for t in times:
        B = reduce(generator(model, S, t))
        numeric = conjugate_numeric(B, R=model.R).values
        reference = bstar_closed_form(model, S, t).values if closed else conjugate_dense(B).values
        if inject_bug:
            reference = reference.copy()
            reference[0, 0] += INJECTED_BUG_SIZE
        diff = np.abs(numeric - reference)[:inner, :inner]
        i, j = np.unravel_index(int(np.argmax(diff)), diff.shape)
        if diff[i, j] > worst.value:
            worst = OracleDiscrepancy(value=float(diff[i, j]), i=int(i) + 1, j=int(j) + 1, t=float(t), method=method)
    if worst.value < 0.0:
        raise ValueError("oracle check needs at least one time instant")
    logger.debug(f"Oracle ({method}) worst discrepancy {worst.value:.3e} at ({worst.i}, {worst.j}), t={worst.t}")
    return worst


def pair_service_rows(lam: float, mu: float, S: int) -> np.ndarray:
    """First two rows of B* for single arrivals and services in pairs."""
    if S < 4:
        raise ValueError(f"display rows need S >= 4, got {S}")
    rows = np.zeros((2, S))
    rows[0, :3] = (-lam, -mu, mu)
    rows[1, :4] = (lam, -(lam + mu), 0.0, mu)
    return rows
