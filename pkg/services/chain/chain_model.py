from dataclasses import dataclass, field
from enum import Enum
from math import ceil, isfinite
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from services.rates.rate_function import (
    Constant,
    RateFunction,
    common_period,
)
from utils.config import DEFAULT_INTENSITY_SAMPLES
from utils.logging_config import get_component_logger

logger = get_component_logger("chain")


class ChainClass(str, Enum):
    """The four transition structures.

    I    birth-death, state-dependent rates
    II   batch arrivals a_k (state independent), single services mu_i
    III  single arrivals lambda_i, group services b_k (state independent)
    IV   batch arrivals a_k and group services b_k, both state independent
    """

    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def has_birth(self) -> bool:
        return self in (ChainClass.I, ChainClass.III)

    @property
    def has_death(self) -> bool:
        return self in (ChainClass.I, ChainClass.II)

    @property
    def has_arrivals(self) -> bool:
        return self in (ChainClass.II, ChainClass.IV)

    @property
    def has_services(self) -> bool:
        return self in (ChainClass.III, ChainClass.IV)


@dataclass(frozen=True)
class MultiplierRule:
    """Per-state factor m_i applied to a base rate: lambda_i(t) = lambda(t) * m_i.

    Rules:
      constant        m_i = 1
      linear-capped   m_i = min(offset + slope * i, cap)
      explicit        m_i = values[i], the last value repeating past the end
    """

    rule: str = "constant"
    offset: float = 1.0
    slope: float = 1.0
    cap: Optional[float] = None
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.rule == "constant":
            return
        if self.rule == "linear-capped":
            if self.cap is None or not isfinite(self.cap):
                raise ValueError("linear-capped multipliers need a finite cap (intensities must stay bounded)")
            if self.offset < 0.0 or self.slope < 0.0 or self.cap < 0.0:
                raise ValueError("linear-capped offset, slope and cap must be >= 0")
            return
        if self.rule == "explicit":
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if not self.values:
                raise ValueError("explicit multipliers need at least one value")
            if any(not isfinite(v) or v < 0.0 for v in self.values):
                raise ValueError("explicit multipliers must be finite and >= 0")
            return
        raise ValueError(
            f"unknown multiplier rule {self.rule!r} (expected constant, linear-capped or explicit)"
        )

    def sequence(self, n: int) -> np.ndarray:
        """m_0 .. m_{n-1}."""
        i = np.arange(n, dtype=float)
        if self.rule == "constant":
            return np.ones(n)
        if self.rule == "linear-capped":
            return np.minimum(self.offset + self.slope * i, self.cap)
        vals = np.asarray(self.values)
        return vals[np.minimum(np.arange(n), len(vals) - 1)]

    def sup(self) -> float:
        if self.rule == "constant":
            return 1.0
        if self.rule == "linear-capped":
            return float(self.cap) if self.slope > 0.0 else min(self.offset, self.cap)
        return max(self.values)

    def saturation_index(self) -> int:
        """First state from which m_i no longer changes."""
        if self.rule == "constant":
            return 0
        if self.rule == "linear-capped":
            if self.slope == 0.0 or self.offset >= self.cap:
                return 0
            return int(ceil((self.cap - self.offset) / self.slope))
        return len(self.values) - 1

    def to_config(self) -> dict:
        if self.rule == "constant":
            return {"rule": "constant"}
        if self.rule == "linear-capped":
            return {"rule": self.rule, "offset": self.offset, "slope": self.slope, "cap": self.cap}
        return {"rule": self.rule, "values": list(self.values)}

    @classmethod
    def from_config(cls, obj: Any) -> "MultiplierRule":
        if obj is None:
            return CONSTANT_MULTIPLIERS
        if isinstance(obj, str):
            return cls(rule=obj)
        if isinstance(obj, list):
            return cls(rule="explicit", values=tuple(obj))
        if not isinstance(obj, dict):
            raise ValueError("multipliers must be a rule name, a list or an object")
        unknown = set(obj) - {"rule", "offset", "slope", "cap", "values"}
        if unknown:
            raise ValueError(f"unknown multiplier keys {sorted(unknown)}")
        kwargs = dict(obj)
        if "values" in kwargs:
            kwargs["values"] = tuple(kwargs["values"])
        return cls(**kwargs)


CONSTANT_MULTIPLIERS = MultiplierRule()


@dataclass(frozen=True)
class RateChannel:
    """One kind of jump: from state j to j + jump at rate rate(t) * m_j."""

    rate: RateFunction
    jump: int
    multipliers: MultiplierRule = CONSTANT_MULTIPLIERS


def as_rate(value: Union[RateFunction, float]) -> RateFunction:
    return value if isinstance(value, RateFunction) else Constant(float(value))


@dataclass(frozen=True)
class ChainModel:
    chain_class: ChainClass
    R: int
    birth: Optional[RateFunction] = None
    death: Optional[RateFunction] = None
    arrivals: Tuple[RateFunction, ...] = ()
    services: Tuple[RateFunction, ...] = ()
    birth_multipliers: MultiplierRule = CONSTANT_MULTIPLIERS
    death_multipliers: MultiplierRule = CONSTANT_MULTIPLIERS
    L: Optional[float] = None
    _channels: Tuple[RateChannel, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "chain_class", ChainClass(self.chain_class))
        object.__setattr__(self, "arrivals", tuple(self.arrivals))
        object.__setattr__(self, "services", tuple(self.services))
        cls = self.chain_class
        if isinstance(self.R, bool) or not isinstance(self.R, int) or self.R < 1:
            raise ValueError(f"band limit R must be a positive integer, got {self.R!r}")
        self._require(cls.has_birth, self.birth is not None, "birth rate")
        self._require(cls.has_death, self.death is not None, "death rate")
        self._require(cls.has_arrivals, bool(self.arrivals), "batch-arrival rates")
        self._require(cls.has_services, bool(self.services), "group-service rates")
        for name, seq in (("arrivals", self.arrivals), ("services", self.services)):
            if seq and len(seq) != self.R:
                raise ValueError(f"class {cls.value} needs exactly R={self.R} {name} rates, got {len(seq)}")
        if cls in (ChainClass.I,) and self.R != 1:
            raise ValueError("class I is a birth-death chain, R must be 1")
        if self.L is not None and (not isfinite(self.L) or self.L < 0.0):
            raise ValueError(f"intensity bound L must be finite and >= 0, got {self.L}")
        object.__setattr__(self, "_channels", self._build_channels())

    def _require(self, needed: bool, given: bool, what: str):
        if needed and not given:
            raise ValueError(f"class {self.chain_class.value} requires {what}")
        if given and not needed:
            raise ValueError(f"class {self.chain_class.value} takes no {what}")

    def _build_channels(self) -> Tuple[RateChannel, ...]:
        channels: List[RateChannel] = []
        if self.birth is not None:
            channels.append(RateChannel(self.birth, +1, self.birth_multipliers))
        for k, a_k in enumerate(self.arrivals, start=1):
            channels.append(RateChannel(a_k, +k))
        if self.death is not None:
            channels.append(RateChannel(self.death, -1, self.death_multipliers))
        # a batch of k leaves only when at least k are present: j - k >= 0
        for k, b_k in enumerate(self.services, start=1):
            channels.append(RateChannel(b_k, -k))
        return tuple(channels)

    # ------------------------------------------------------------------ #
    # Convenience constructors
    # ------------------------------------------------------------------ #
    @classmethod
    def birth_death(cls, birth, death, **kwargs) -> "ChainModel":
        return cls(ChainClass.I, 1, birth=as_rate(birth), death=as_rate(death), **kwargs)

    @classmethod
    def pair_service(cls, birth, service) -> "ChainModel":
        """Single arrivals, services only in groups of two (b_1 = 0, b_2 = service)."""
        return cls(ChainClass.III, 2, birth=as_rate(birth), services=(Constant(0.0), as_rate(service)))

    # ------------------------------------------------------------------ #
    # Rate access
    # ------------------------------------------------------------------ #
    @property
    def channels(self) -> Tuple[RateChannel, ...]:
        return self._channels

    @property
    def rates(self) -> Tuple[RateFunction, ...]:
        return tuple(ch.rate for ch in self._channels)

    @property
    def is_constant(self) -> bool:
        return all(r.is_constant for r in self.rates)

    @property
    def period(self) -> Optional[float]:
        return common_period(self.rates)

    def critical_times(self, horizon: float) -> Tuple[float, ...]:
        times = set()
        for r in self.rates:
            times.update(r.critical_times(horizon))
        return tuple(sorted(times))

    def birth_sequence(self, n: int, t: float) -> np.ndarray:
        """lambda_0 .. lambda_{n-1} at time t."""
        return self.birth.eval(t) * self.birth_multipliers.sequence(n)

    def death_sequence(self, n: int, t: float) -> np.ndarray:
        """mu_0 .. mu_{n-1} at time t (mu_0 is never used)."""
        return self.death.eval(t) * self.death_multipliers.sequence(n)

    def arrival_values(self, t: float) -> np.ndarray:
        return np.array([a.eval(t) for a in self.arrivals])

    def service_values(self, t: float) -> np.ndarray:
        return np.array([b.eval(t) for b in self.services])

    def outflow(self, states: Union[Sequence[int], np.ndarray], t: float) -> np.ndarray:
        """Total exit intensity of each state in the untruncated chain."""
        states = np.asarray(states, dtype=int)
        if states.size and states.min() < 0:
            raise ValueError("states must be >= 0")
        n = int(states.max()) + 1 if states.size else 0
        total = np.zeros(states.shape)
        for ch in self._channels:
            m = ch.multipliers.sequence(n)[states]
            live = states + ch.jump >= 0
            total += np.where(live, ch.rate.eval(t) * m, 0.0)
        return total

    def rate_ceiling(self) -> float:
        """Analytic upper bound on the total outflow: sum of channel suprema."""
        return float(sum(ch.rate.sup() * ch.multipliers.sup() for ch in self._channels))

    def outflow_horizon_states(self) -> int:
        """Number of states after which the outflow pattern repeats."""
        sat = max((ch.multipliers.saturation_index() for ch in self._channels), default=0)
        return sat + self.R + 2

    def describe(self) -> str:
        return (
            f"class {self.chain_class.value}, R={self.R}, "
            f"{len(self._channels)} rate channels, "
            f"{'constant' if self.is_constant else 'time-varying'} rates"
        )


def intensity_bound(
    model: ChainModel,
    horizon: float,
    samples: int = DEFAULT_INTENSITY_SAMPLES,
) -> float:
    """Sampled supremum over time and states of the total outflow.

    Exact for constant rates. Otherwise the sample set is a uniform grid of
    ``samples`` points on ``[0, horizon]`` plus every rate breakpoint and
    every sinusoid extremum.
    """
    if not horizon > 0.0:
        logger.error(f"intensity_bound called with horizon={horizon}")
        raise ValueError(f"horizon must be > 0, got {horizon}")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    states = np.arange(model.outflow_horizon_states())
    if model.is_constant:
        times: Iterable[float] = (0.0,)
    else:
        times = sorted(set(np.linspace(0.0, horizon, samples).tolist()) | set(model.critical_times(horizon)))
    bound = 0.0
    for t in times:
        bound = max(bound, float(model.outflow(states, t).max(initial=0.0)))
    logger.debug(f"Sampled intensity bound {bound:.6g} for {model.describe()}")
    return bound
