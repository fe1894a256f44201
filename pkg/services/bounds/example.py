"""Closed-form decay-rate lower bound for single arrivals with services in
pairs, scaled by the PAIR_SERVICE family:

    alpha(t) >= min[ lambda(1 - 1/delta),
                     mu(1 + delta) - lambda(delta^2 - 1),
                     mu(1 - 1/delta) - lambda(delta - 1) ]
"""

from math import sqrt
from typing import List, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from services.chain.chain_model import as_rate
from services.rates.rate_function import RateFunction
from utils.logging_config import get_component_logger

logger = get_component_logger("bounds")

RateLike = Union[RateFunction, float]

# root bracketing resolution per period when locating switching instants
SWITCH_SCAN_POINTS = 4096


def _check_delta(delta: float):
    if not delta > 1.0:
        logger.error(f"Rejected delta={delta}")
        raise ValueError(f"delta must be > 1, got {delta}")


def example_coefficients(delta: float) -> np.ndarray:
    """Rows (c_lambda, c_mu) so that term_k = c_lambda * lambda + c_mu * mu."""
    _check_delta(delta)
    return np.array(
        [
            [1.0 - 1.0 / delta, 0.0],
            [-(delta**2 - 1.0), 1.0 + delta],
            [-(delta - 1.0), 1.0 - 1.0 / delta],
        ]
    )


def example_terms(lam: float, mu: float, delta: float) -> np.ndarray:
    return example_coefficients(delta) @ np.array([lam, mu])


def example_alpha(lam: RateLike, mu: RateLike, delta: float, t: float = 0.0) -> float:
    lam, mu = as_rate(lam), as_rate(mu)
    return float(example_terms(lam.eval(t), mu.eval(t), delta).min())


def optimal_delta(lam: float, mu: float) -> Tuple[float, float]:
    """delta = sqrt(mu / lambda) and the resulting rate.

    Returns ``(delta, alpha)`` with alpha = min[(sqrt(mu) - sqrt(lambda))^2,
    lambda (1 - sqrt(lambda / mu))].
    """
    if not lam > 0.0 or not mu > lam:
        logger.error(f"optimal_delta needs 0 < lambda < mu, got lambda={lam}, mu={mu}")
        raise ValueError(f"no certificate unless 0 < lambda < mu (got lambda={lam}, mu={mu})")
    delta = sqrt(mu / lam)
    alpha = min((sqrt(mu) - sqrt(lam)) ** 2, lam * (1.0 - sqrt(lam / mu)))
    return delta, alpha


def switching_times(lam: RateFunction, mu: RateFunction, delta: float, period: float) -> List[float]:
    """Instants in (0, period) where two of the three terms cross."""
    coeffs = example_coefficients(delta)
    scan = np.union1d(np.linspace(0.0, period, SWITCH_SCAN_POINTS + 1), lam.critical_times(period))
    scan = np.union1d(scan, mu.critical_times(period))

    def gap(a: int, b: int):
        c = coeffs[a] - coeffs[b]
        return lambda t: c[0] * lam.eval(t) + c[1] * mu.eval(t)

    switches = set()
    for a, b in ((0, 1), (0, 2), (1, 2)):
        f = gap(a, b)
        values = np.array([f(t) for t in scan])
        for k in np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]:
            switches.add(brentq(f, scan[k], scan[k + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
        switches.update(scan[values == 0.0].tolist())
    # rate jumps may also switch the minimizer
    switches.update(lam.breakpoints)
    switches.update(mu.breakpoints)
    return sorted(t for t in switches if 0.0 < t < period)


def example_alpha_average(lam: RateLike, mu: RateLike, delta: float, period: float) -> float:
    """Exact period mean of ``example_alpha``.

    Between consecutive switching instants one term is the minimum and it is
    linear in (lambda, mu), so its integral is exact.
    """
    _check_delta(delta)
    if not period > 0.0:
        raise ValueError(f"period must be > 0, got {period}")
    lam, mu = as_rate(lam), as_rate(mu)
    coeffs = example_coefficients(delta)
    knots = [0.0] + switching_times(lam, mu, delta, period) + [period]
    total = 0.0
    for s, t in zip(knots[:-1], knots[1:]):
        mid = 0.5 * (s + t)
        k = int(np.argmin(coeffs @ np.array([lam.eval(mid), mu.eval(mid)])))
        total += coeffs[k, 0] * lam.integrate(s, t) + coeffs[k, 1] * mu.integrate(s, t)
    return total / period
