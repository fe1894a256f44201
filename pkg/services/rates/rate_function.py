"""Time-dependent transition intensities with exact evaluation and exact
interval integrals.

Three variants are supported: constant, piecewise constant (right-continuous
at its breakpoints) and sinusoidal ``base * (1 + amp * sin(2*pi*freq*t + phase))``.
Every variant has a closed-form antiderivative, so ``integrate`` carries no
quadrature error.
"""

from abc import ABC, abstractmethod
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from math import floor, gcd, isfinite, lcm, pi, sin
from typing import Any, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.logging_config import get_component_logger

logger = get_component_logger("rates")

TWO_PI = 2.0 * pi
PERIOD_DENOMINATOR = 10**6


class RateError(ValueError):
    """Raised for invalid rate parameters or invalid evaluation times."""


def _check_time(t: float, name: str = "t") -> float:
    t = float(t)
    if not isfinite(t) or t < 0.0:
        logger.error(f"Rejected time {name}={t}: rates are defined for t >= 0")
        raise RateError(f"{name} must be a finite time >= 0, got {t}")
    return t


class RateFunction(ABC):
    """Nonnegative, locally integrable function of time (events per unit time)."""

    kind: str = ""

    def eval(self, t: float) -> float:
        """Value at time ``t >= 0``."""
        return float(self._values(np.asarray([_check_time(t)]))[0])

    def __call__(self, t: float) -> float:
        return self.eval(t)

    def values(self, times: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        """Vectorized evaluation on a grid of nonnegative times."""
        times = np.asarray(times, dtype=float)
        if times.size and (not np.all(np.isfinite(times)) or times.min() < 0.0):
            raise RateError("all evaluation times must be finite and >= 0")
        return self._values(times)

    def integrate(self, s: float, t: float) -> float:
        """Exact integral of the rate over ``[s, t]``."""
        s = _check_time(s, "s")
        t = _check_time(t, "t")
        if s > t:
            logger.error(f"Rejected integration interval [{s}, {t}]")
            raise RateError(f"integration requires s <= t, got s={s}, t={t}")
        if s == t:
            return 0.0
        return self._integral(s, t)

    @property
    def is_constant(self) -> bool:
        return False

    @property
    def period(self) -> Optional[float]:
        """Smallest period for periodic variants, ``None`` otherwise."""
        return None

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    def critical_times(self, horizon: float) -> Tuple[float, ...]:
        """Instants in ``[0, horizon]`` where the rate jumps or peaks."""
        return ()

    @abstractmethod
    def sup(self) -> float:
        """Exact supremum over ``t >= 0``."""

    @abstractmethod
    def inf(self) -> float:
        """Exact infimum over ``t >= 0``."""

    @abstractmethod
    def to_config(self) -> dict:
        """Tagged-object form used in scenario files."""

    @abstractmethod
    def _values(self, times: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _integral(self, s: float, t: float) -> float: ...


@dataclass(frozen=True)
class Constant(RateFunction):
    value: float
    kind = "const"

    def __post_init__(self):
        if not isfinite(self.value) or self.value < 0.0:
            raise RateError(f"constant rate must be finite and >= 0, got {self.value}")

    @property
    def is_constant(self) -> bool:
        return True

    def sup(self) -> float:
        return float(self.value)

    def inf(self) -> float:
        return float(self.value)

    def to_config(self) -> dict:
        return {"kind": self.kind, "value": float(self.value)}

    def _values(self, times: np.ndarray) -> np.ndarray:
        return np.full(times.shape, float(self.value))

    def _integral(self, s: float, t: float) -> float:
        return float(self.value) * (t - s)


@dataclass(frozen=True)
class PiecewiseConstant(RateFunction):
    """``values[k]`` holds on ``[breaks[k-1], breaks[k])``; right-continuous."""

    breaks: Tuple[float, ...]
    rates: Tuple[float, ...]
    kind = "pwc"

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breaks)
        rates = tuple(float(v) for v in self.rates)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "rates", rates)
        if len(rates) != len(breaks) + 1:
            raise RateError(
                f"piecewise rate needs len(values) == len(breaks) + 1, "
                f"got {len(rates)} values for {len(breaks)} breaks"
            )
        if any(not isfinite(b) or b <= 0.0 for b in breaks):
            raise RateError("piecewise breakpoints must be finite and > 0")
        if any(b1 >= b2 for b1, b2 in zip(breaks, breaks[1:])):
            raise RateError("piecewise breakpoints must be strictly ascending")
        if any(not isfinite(v) or v < 0.0 for v in rates):
            raise RateError("piecewise values must be finite and >= 0")

    @property
    def is_constant(self) -> bool:
        return len(set(self.rates)) == 1

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self.breaks

    def critical_times(self, horizon: float) -> Tuple[float, ...]:
        return tuple(b for b in self.breaks if b <= horizon)

    def sup(self) -> float:
        return max(self.rates)

    def inf(self) -> float:
        return min(self.rates)

    def to_config(self) -> dict:
        return {"kind": self.kind, "breaks": list(self.breaks), "values": list(self.rates)}

    def _segment(self, t: float) -> int:
        return bisect_right(self.breaks, t)

    def _values(self, times: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breaks), times, side="right")
        return np.asarray(self.rates)[idx]

    def _integral(self, s: float, t: float) -> float:
        ks, kt = self._segment(s), self._segment(t)
        if ks == kt:
            return self.rates[ks] * (t - s)
        # segment by segment, so the error scales with the interval, not with F(t)
        total = self.rates[ks] * (self.breaks[ks] - s)
        for k in range(ks + 1, kt):
            total += self.rates[k] * (self.breaks[k] - self.breaks[k - 1])
        return total + self.rates[kt] * (t - self.breaks[kt - 1])


@dataclass(frozen=True)
class Sinusoidal(RateFunction):
    """``base * (1 + amp * sin(2*pi*freq*t + phase))`` with ``|amp| <= 1``."""

    base: float
    amp: float
    freq: float
    phase: float = 0.0
    kind = "sin"

    def __post_init__(self):
        for name in ("base", "amp", "freq", "phase"):
            if not isfinite(getattr(self, name)):
                raise RateError(f"sinusoidal {name} must be finite")
        if self.base < 0.0:
            raise RateError(f"sinusoidal base must be >= 0, got {self.base}")
        if abs(self.amp) > 1.0:
            raise RateError(f"sinusoidal amplitude fraction must satisfy |a| <= 1, got {self.amp}")
        if self.freq < 0.0:
            raise RateError(f"sinusoidal frequency must be >= 0, got {self.freq}")

    @property
    def omega(self) -> float:
        return TWO_PI * self.freq

    @property
    def is_constant(self) -> bool:
        return self.freq == 0.0 or self.amp == 0.0 or self.base == 0.0

    @property
    def period(self) -> Optional[float]:
        if self.is_constant:
            return None
        return 1.0 / self.freq

    def critical_times(self, horizon: float) -> Tuple[float, ...]:
        if self.is_constant:
            return ()
        times = []
        # sin(omega t + phase) = +-1  <=>  omega t + phase = pi/2 + k pi
        k = floor((self.phase - pi / 2) / pi)
        while True:
            t = (pi / 2 + k * pi - self.phase) / self.omega
            if t > horizon:
                break
            if t >= 0.0:
                times.append(t)
            k += 1
        return tuple(times)

    def sup(self) -> float:
        if self.freq == 0.0:
            return self.base * (1.0 + self.amp * sin(self.phase))
        return self.base * (1.0 + abs(self.amp))

    def inf(self) -> float:
        if self.freq == 0.0:
            return self.base * (1.0 + self.amp * sin(self.phase))
        return self.base * (1.0 - abs(self.amp))

    def to_config(self) -> dict:
        return {
            "kind": self.kind,
            "base": float(self.base),
            "amp": float(self.amp),
            "freq": float(self.freq),
            "phase": float(self.phase),
        }

    def _values(self, times: np.ndarray) -> np.ndarray:
        return self.base * (1.0 + self.amp * np.sin(self.omega * times + self.phase))

    def _integral(self, s: float, t: float) -> float:
        if self.freq == 0.0:
            return self.base * (1.0 + self.amp * sin(self.phase)) * (t - s)
        # cos(x) - cos(y) = -2 sin((x+y)/2) sin((x-y)/2), kept in product form for accuracy
        w = self.omega
        half_sum = 0.5 * w * (t + s) + self.phase
        half_diff = 0.5 * w * (t - s)
        cos_drop = 2.0 * sin(half_sum) * sin(half_diff)  # cos(ws+p) - cos(wt+p)
        return self.base * ((t - s) + self.amp * cos_drop / w)


RATE_KINDS = {"const": Constant, "pwc": PiecewiseConstant, "sin": Sinusoidal}


def rate_from_config(obj: Any, path: str = "rate") -> RateFunction:
    """Build a rate from its tagged-object form.

    A bare number is accepted as a constant rate. Invalid objects raise
    ``RateError`` whose message starts with ``path``.
    """
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return _build(path, Constant, value=float(obj))
    if not isinstance(obj, Mapping):
        raise RateError(f"{path}: expected a tagged rate object or a number")
    kind = obj.get("kind")
    if kind == "const":
        return _build(path, Constant, value=_number(obj, "value", path))
    if kind == "pwc":
        breaks = obj.get("breaks", [])
        values = obj.get("values")
        if not isinstance(breaks, list) or not isinstance(values, list):
            raise RateError(f"{path}: 'breaks' and 'values' must be lists")
        return _build(path, PiecewiseConstant, breaks=tuple(breaks), rates=tuple(values))
    if kind == "sin":
        return _build(
            path,
            Sinusoidal,
            base=_number(obj, "base", path),
            amp=_number(obj, "amp", path),
            freq=_number(obj, "freq", path),
            phase=float(obj.get("phase", 0.0)),
        )
    raise RateError(f"{path}.kind: unknown rate kind {kind!r} (expected one of {sorted(RATE_KINDS)})")


def _number(obj: Mapping, key: str, path: str) -> float:
    if key not in obj:
        raise RateError(f"{path}.{key}: missing")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RateError(f"{path}.{key}: expected a number, got {value!r}")
    return float(value)


def _build(path: str, cls, **kwargs) -> RateFunction:
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise RateError(f"{path}: {e}") from e


ZERO = Constant(0.0)


def common_period(rates: Iterable[RateFunction]) -> Optional[float]:
    """Least common period of a family of rates.

    Returns ``None`` when every rate is constant or when some rate is
    non-constant and not periodic (piecewise with distinct values).
    Sinusoid periods are matched as rationals, so incommensurate
    frequencies yield a very long (but finite) common period.
    """
    periods = []
    for rate in rates:
        if rate.is_constant:
            continue
        if rate.period is None:
            return None
        periods.append(Fraction(rate.period).limit_denominator(PERIOD_DENOMINATOR))
    if not periods:
        return None
    num, den = periods[0].numerator, periods[0].denominator
    for p in periods[1:]:
        num = lcm(num, p.numerator)
        den = gcd(den, p.denominator)
    return num / den
